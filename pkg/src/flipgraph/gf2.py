"""Bit-packed GF(2) vectors and matrices.

A vector of length ``n`` is stored as a Python ``int`` whose bit ``q`` holds
coefficient ``q``. The printed form lists coefficients left to right, so the
string ``"110"`` is the integer ``0b011``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

MAX_BITS = 64


def bits_to_str(bits: int, length: int) -> str:
    return "".join("1" if (bits >> q) & 1 else "0" for q in range(length))


def str_to_bits(text: str) -> int:
    bits = 0
    for q, ch in enumerate(text):
        if ch == "1":
            bits |= 1 << q
        elif ch != "0":
            raise ValueError(f"invalid bit character {ch!r} in {text!r}")
    return bits


@dataclass(frozen=True)
class BitVector:
    bits: int
    length: int

    def __post_init__(self):
        if not 1 <= self.length <= MAX_BITS:
            raise ValueError(f"length must be in 1..{MAX_BITS}, got {self.length}")
        if self.bits < 0 or self.bits >> self.length:
            raise ValueError(f"bits {self.bits:#x} do not fit in length {self.length}")

    @classmethod
    def from_str(cls, text: str) -> "BitVector":
        return cls(str_to_bits(text), len(text))

    def __str__(self) -> str:
        return bits_to_str(self.bits, self.length)

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return BitVector(self.bits ^ other.bits, self.length)

    def __getitem__(self, q: int) -> int:
        if not 0 <= q < self.length:
            raise IndexError(q)
        return (self.bits >> q) & 1

    def __bool__(self) -> bool:
        return self.bits != 0

    def weight(self) -> int:
        return bin(self.bits).count("1")


@dataclass(frozen=True)
class GF2Matrix:
    """Row-major GF(2) matrix; ``rows[i]`` is the bitmask of row ``i``."""

    rows: Tuple[int, ...]
    cols: int

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if not 1 <= self.cols <= MAX_BITS:
            raise ValueError(f"cols must be in 1..{MAX_BITS}, got {self.cols}")
        for r in self.rows:
            if r < 0 or r >> self.cols:
                raise ValueError(f"row {r:#x} does not fit in {self.cols} columns")

    @classmethod
    def from_strings(cls, rows: Sequence[str]) -> "GF2Matrix":
        if not rows:
            raise ValueError("cannot infer column count from an empty row list")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError("rows have different lengths")
        return cls(tuple(str_to_bits(r) for r in rows), widths.pop())

    @classmethod
    def from_vectors(cls, vectors: Sequence[BitVector]) -> "GF2Matrix":
        if not vectors:
            raise ValueError("cannot infer column count from an empty row list")
        cols = vectors[0].length
        if any(v.length != cols for v in vectors):
            raise ValueError("rows have different lengths")
        return cls(tuple(v.bits for v in vectors), cols)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def row_data(self) -> List[BitVector]:
        return [BitVector(r, self.cols) for r in self.rows]

    def __str__(self) -> str:
        return "\n".join(bits_to_str(r, self.cols) for r in self.rows)


def rank_of_rows(rows: Iterable[int]) -> int:
    """Rank of a list of int row masks (no width needed)."""
    pivots: dict = {}
    rank = 0
    for row in rows:
        while row:
            low = row & -row
            if low in pivots:
                row ^= pivots[low]
            else:
                pivots[low] = row
                rank += 1
                break
    return rank


def rref(rows: Sequence[int], ncols: int) -> Tuple[List[int], List[int]]:
    """Reduced row echelon form; returns (basis rows, pivot columns), pivots ascending."""
    work = [r for r in rows]
    pivots: List[int] = []
    top = 0
    for col in range(ncols):
        bit = 1 << col
        pivot = None
        for r in range(top, len(work)):
            if work[r] & bit:
                pivot = r
                break
        if pivot is None:
            continue
        work[top], work[pivot] = work[pivot], work[top]
        for r in range(len(work)):
            if r != top and work[r] & bit:
                work[r] ^= work[top]
        pivots.append(col)
        top += 1
        if top == len(work):
            break
    return work[:top], pivots


def gf2_rank(m: GF2Matrix) -> int:
    return len(rref(m.rows, m.cols)[1])


def independent_subset(vectors: Sequence[int]) -> List[int]:
    """Indices of a maximal independent subset, chosen greedily in order."""
    pivots: dict = {}
    chosen = []
    for idx, vec in enumerate(vectors):
        row = vec
        while row:
            low = row & -row
            if low in pivots:
                row ^= pivots[low]
            else:
                pivots[low] = row
                chosen.append(idx)
                break
    return chosen


def _reduce(vec: int, basis: dict) -> int:
    while vec:
        low = vec & -vec
        if low not in basis:
            return vec
        vec ^= basis[low]
    return 0


def gf2_solve(basis: GF2Matrix, target: BitVector) -> Optional[BitVector]:
    """Coefficients selecting rows of ``basis`` whose XOR is ``target``.

    Returns ``None`` when ``target`` lies outside the row span. Among several
    solutions the lexicographically smallest coefficient string is returned,
    reading coefficient 0 (row 0) first: each row is left out whenever the
    remaining rows can still reach the remaining target.
    """
    if target.length != basis.cols:
        raise ValueError(f"target length {target.length} != basis cols {basis.cols}")
    rows = basis.rows
    nrows = len(rows)
    if nrows == 0:
        # no coefficient vector of length 0 exists
        return None
    # suffix_spans[i] spans rows[i:]
    suffix_spans: List[dict] = [dict() for _ in range(nrows + 1)]
    span: dict = {}
    for i in range(nrows - 1, -1, -1):
        span = dict(span)
        row = _reduce(rows[i], span)
        if row:
            span[row & -row] = row
        suffix_spans[i] = span
    if _reduce(target.bits, suffix_spans[0]):
        return None
    coeffs = 0
    rest = target.bits
    for i in range(nrows):
        if _reduce(rest, suffix_spans[i + 1]) == 0:
            continue
        coeffs |= 1 << i
        rest ^= rows[i]
    assert rest == 0
    return BitVector(coeffs, nrows)


def outer(col: int, row: int, nrows: int) -> List[int]:
    return [row if (col >> q) & 1 else 0 for q in range(nrows)]


def gf2_rank_one_factorization(m: GF2Matrix) -> List[Tuple[BitVector, BitVector]]:
    """Write ``m`` as an XOR of rank-many outer products ``col * row``.

    The rows are the reduced echelon basis (pivot column ascending); the
    matching column vector marks which rows of ``m`` contain that pivot.
    """
    basis, pivots = rref(m.rows, m.cols)
    nrows = len(m.rows)
    pairs = []
    for vec, piv in zip(basis, pivots):
        col = 0
        for q, row in enumerate(m.rows):
            if (row >> piv) & 1:
                col |= 1 << q
        pairs.append((BitVector(col, nrows), BitVector(vec, m.cols)))
    return pairs
