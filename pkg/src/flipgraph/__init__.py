"""Low-rank matrix multiplication schemes over GF(2) via flip graph search."""

from flipgraph.gf2 import BitVector, GF2Matrix, gf2_rank, gf2_rank_one_factorization, gf2_solve
from flipgraph.scheme import (
    Scheme,
    Term,
    component_ranks,
    mul_tensor_entry,
    standard_scheme,
    strassen_scheme,
    verify,
)

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path of a scheme file shipped with the package (e.g. ``strassen.mms``)."""
    from importlib.resources import files

    return files("flipgraph") / "fixtures" / name

__all__ = [
    "BitVector",
    "GF2Matrix",
    "Scheme",
    "Term",
    "component_ranks",
    "fixture_path",
    "gf2_rank",
    "gf2_rank_one_factorization",
    "gf2_solve",
    "mul_tensor_entry",
    "standard_scheme",
    "strassen_scheme",
    "verify",
]
