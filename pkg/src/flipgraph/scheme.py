"""Matrix multiplication schemes over GF(2).

Flattening layout (0-based): ``alpha`` bit ``i*m + j`` is entry (i, j) of the
n x m factor, ``beta`` bit ``j*p + k`` is entry (j, k) of the m x p factor and
``gamma`` bit ``k*n + i`` is entry (k, i) of the p x n factor. A term's
``gamma`` therefore says which entries C[i, k] of the product receive it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Tuple

import numpy as np

from flipgraph.gf2 import MAX_BITS, rank_of_rows


class Term(NamedTuple):
    alpha: int
    beta: int
    gamma: int


def check_dims(n: int, m: int, p: int) -> None:
    if min(n, m, p) < 1:
        raise ValueError(f"dimensions must be positive, got {(n, m, p)}")
    if max(n * m, m * p, p * n) > MAX_BITS:
        raise ValueError(f"dims {n}x{m}x{p} overflow a {MAX_BITS}-bit factor")


@dataclass(frozen=True)
class Scheme:
    n: int
    m: int
    p: int
    terms: Tuple[Term, ...]

    def __post_init__(self):
        check_dims(self.n, self.m, self.p)
        object.__setattr__(self, "terms", tuple(Term(*t) for t in self.terms))

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (self.n, self.m, self.p)

    @property
    def lengths(self) -> Tuple[int, int, int]:
        """Bit lengths of the alpha, beta and gamma components."""
        return (self.n * self.m, self.m * self.p, self.p * self.n)

    @property
    def rank(self) -> int:
        return len(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def with_terms(self, terms: Iterable[Sequence[int]]) -> "Scheme":
        return Scheme(self.n, self.m, self.p, tuple(terms))

    def same_terms(self, other: "Scheme") -> bool:
        """Multiset equality; term order is ignored."""
        return self.dims == other.dims and Counter(self.terms) == Counter(other.terms)

    def is_well_formed(self) -> bool:
        la, lb, lc = self.lengths
        for a, b, c in self.terms:
            if not (0 < a < (1 << la) and 0 < b < (1 << lb) and 0 < c < (1 << lc)):
                return False
        return True


def alpha_index(n: int, m: int, i: int, j: int) -> int:
    return i * m + j


def beta_index(m: int, p: int, j: int, k: int) -> int:
    return j * p + k


def gamma_index(p: int, n: int, k: int, i: int) -> int:
    return k * n + i


def mul_tensor_entry(n: int, m: int, p: int, x: int, y: int, z: int) -> int:
    """Coefficient of the multiplication tensor at flat indices (x, y, z)."""
    if not (0 <= x < n * m and 0 <= y < m * p and 0 <= z < p * n):
        raise IndexError(f"index ({x}, {y}, {z}) out of range for dims {(n, m, p)}")
    i, j = divmod(x, m)
    j2, k = divmod(y, p)
    k2, i2 = divmod(z, n)
    return int(j == j2 and k == k2 and i == i2)


def standard_scheme(n: int, m: int, p: int) -> Scheme:
    check_dims(n, m, p)
    terms = []
    for i in range(n):
        for j in range(m):
            for k in range(p):
                terms.append(
                    Term(
                        1 << alpha_index(n, m, i, j),
                        1 << beta_index(m, p, j, k),
                        1 << gamma_index(p, n, k, i),
                    )
                )
    return Scheme(n, m, p, tuple(terms))


def _a(i: int, j: int) -> int:
    return 1 << alpha_index(2, 2, i - 1, j - 1)


def _b(j: int, k: int) -> int:
    return 1 << beta_index(2, 2, j - 1, k - 1)


def _c(k: int, i: int) -> int:
    return 1 << gamma_index(2, 2, k - 1, i - 1)


def strassen_scheme() -> Scheme:
    """Strassen's seven products with signs dropped (characteristic two)."""
    terms = [
        (_a(1, 1) | _a(2, 2), _b(1, 1) | _b(2, 2), _c(1, 1) | _c(2, 2)),
        (_a(2, 1) | _a(2, 2), _b(1, 1), _c(1, 2) | _c(2, 2)),
        (_a(1, 1), _b(1, 2) | _b(2, 2), _c(2, 1) | _c(2, 2)),
        (_a(2, 2), _b(2, 1) | _b(1, 1), _c(1, 1) | _c(1, 2)),
        (_a(1, 1) | _a(1, 2), _b(2, 2), _c(2, 1) | _c(1, 1)),
        (_a(2, 1) | _a(1, 1), _b(1, 1) | _b(1, 2), _c(2, 2)),
        (_a(1, 2) | _a(2, 2), _b(2, 1) | _b(2, 2), _c(1, 1)),
    ]
    return Scheme(2, 2, 2, tuple(terms))


def unpack_bits(values: Sequence[int], length: int) -> np.ndarray:
    """(len(values), length) uint8 array of the bits of each value."""
    arr = np.array(values, dtype=np.uint64).reshape(-1, 1)
    shifts = np.arange(length, dtype=np.uint64)
    return ((arr >> shifts) & np.uint64(1)).astype(np.uint8)


def multiplication_tensor(n: int, m: int, p: int) -> np.ndarray:
    """Dense 0/1 array of shape (n*m, m*p, p*n)."""
    t = np.zeros((n * m, m * p, p * n), dtype=np.uint8)
    for i in range(n):
        for j in range(m):
            for k in range(p):
                t[alpha_index(n, m, i, j), beta_index(m, p, j, k), gamma_index(p, n, k, i)] = 1
    return t


def scheme_tensor(s: Scheme) -> np.ndarray:
    """Parity sum of all terms as a dense (n*m, m*p, p*n) 0/1 array."""
    la, lb, lc = s.lengths
    if not s.terms:
        return np.zeros((la, lb, lc), dtype=np.uint8)
    a = unpack_bits([t.alpha for t in s.terms], la).astype(np.int64)
    b = unpack_bits([t.beta for t in s.terms], lb).astype(np.int64)
    c = unpack_bits([t.gamma for t in s.terms], lc).astype(np.int64)
    ab = (a[:, :, None] * b[:, None, :]).reshape(len(s.terms), la * lb)
    return ((ab.T @ c) & 1).astype(np.uint8).reshape(la, lb, lc)


def verify(s: Scheme) -> bool:
    if not s.is_well_formed():
        return False
    return bool(np.array_equal(scheme_tensor(s), multiplication_tensor(s.n, s.m, s.p)))


def component_ranks(s: Scheme) -> Tuple[int, int, int]:
    return (
        rank_of_rows(t.alpha for t in s.terms),
        rank_of_rows(t.beta for t in s.terms),
        rank_of_rows(t.gamma for t in s.terms),
    )
