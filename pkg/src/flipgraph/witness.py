"""Independent oracles and a constructive path between any two schemes.

``connectivity_path`` follows the constructive connectivity argument for
GF(2): pad the source with plus moves, rewrite its leading terms one
component at a time into the destination terms using splits whose donors are
components already present, then break the leftover tail (which sums to zero)
into products of basis vectors and cancel them in equal pairs.

Index bookkeeping: terms keep stable positions while they are rewritten and
every split appends its remainder at the end of the term list. Reductions
only ever touch tail positions (at or beyond ``len(dst)``).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import product
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from flipgraph.gf2 import BitVector, GF2Matrix, gf2_rank_one_factorization, gf2_solve, independent_subset
from flipgraph.moves import (
    FlipMove,
    MoveError,
    PlusMove,
    Slot,
    apply_flip,
    apply_general_reduction,
    apply_pairwise_reduction,
    apply_plus,
    apply_split,
    enumerate_plus_pairs,
    group_matrix,
    reduction_groups,
    shared_slots,
)
from flipgraph.scheme import Scheme, component_ranks, verify

BRUTE_FORCE_LIMIT = 20  # log2 of the number of (A, B) pairs we are willing to enumerate
PATH_DIMS = {(2, 2, 2), (2, 2, 3)}
ASSIGN_VARIANTS = 4

Move = Tuple


class PathError(ValueError):
    """A connectivity path could not be built for the given schemes."""


def _parities(masks: Sequence[int], nbits: int) -> np.ndarray:
    """``out[x, t]`` = parity of ``x & masks[t]`` for every ``x`` in [0, 2**nbits)."""
    xs = np.arange(1 << nbits, dtype=np.int64)
    out = np.zeros((len(xs), len(masks)), dtype=np.int64)
    for t, mask in enumerate(masks):
        v = xs & mask
        par = np.zeros_like(v)
        for q in range(nbits):
            par ^= (v >> q) & 1
        out[:, t] = par
    return out


def brute_force_verify(s: Scheme) -> bool:
    """Check ``s`` against the plain matrix product on every 0/1 input pair.

    Each scheme term contributes ``<alpha, A> * <beta, B> * gamma`` to C; all
    2^(nm) x 2^(mp) pairs are evaluated at once with integer matrix products.
    """
    n, m, p = s.dims
    if n * m + m * p > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"{n}x{m}x{p} needs 2^{n * m + m * p} input pairs; use verify() for large shapes"
        )
    if not s.is_well_formed():
        return False
    # A[a, i, j] and B[b, j, k] for every input index a, b
    a_idx = np.arange(1 << (n * m), dtype=np.int64)
    b_idx = np.arange(1 << (m * p), dtype=np.int64)
    A = ((a_idx[:, None] >> np.arange(n * m)) & 1).reshape(-1, n, m)
    B = ((b_idx[:, None] >> np.arange(m * p)) & 1).reshape(-1, m, p)
    left = _parities([t[0] for t in s.terms], n * m)
    right = _parities([t[1] for t in s.terms], m * p)
    for i, k in product(range(n), range(p)):
        want = (A[:, i, :] @ B[:, :, k].T) & 1
        g = np.array([(t[2] >> (k * n + i)) & 1 for t in s.terms], dtype=np.int64)
        got = ((left * g) @ right.T) & 1
        if not np.array_equal(got, want):
            return False
    return True


def apply_move(s: Scheme, mv: Move) -> Scheme:
    kind = mv[0]
    if kind == "flip":
        _, slot, i, j = mv
        return apply_flip(s, FlipMove(Slot(slot), i, j))
    if kind == "plus":
        _, slot, i, j = mv
        return apply_plus(s, PlusMove(i, j, Slot(slot)))
    if kind == "reduce":
        _, i, j = mv
        return apply_pairwise_reduction(s, i, j)
    if kind == "greduce":
        _, slot, members = mv
        return apply_general_reduction(s, slot, members)
    if kind == "split":
        _, slot, idx, donor = mv
        return apply_split(s, idx, slot, donor)
    raise MoveError(f"unknown move kind {kind!r}")


@dataclass
class MoveScript:
    dims: Tuple[int, int, int]
    moves: List[Move] = field(default_factory=list)
    peak_rank: int = 0

    def __len__(self) -> int:
        return len(self.moves)

    def schemes(self, start: Scheme) -> Iterator[Scheme]:
        """Yield ``start`` and the scheme after every move."""
        if start.dims != tuple(self.dims):
            raise ValueError(f"script is for {self.dims}, scheme is {start.dims}")
        s = start
        yield s
        for mv in self.moves:
            s = apply_move(s, mv)
            yield s

    def replay(self, start: Scheme, check: bool = True) -> Scheme:
        s = start
        for k, s in enumerate(self.schemes(start)):
            if check and not verify(s):
                raise MoveError(f"scheme after move {k} does not verify")
        return s


class _Builder:
    def __init__(self, src: Scheme):
        self.s = src
        self.moves: List[Move] = []
        self.peak = src.rank

    def do(self, mv: Move) -> None:
        self.s = apply_move(self.s, mv)
        self.moves.append(mv)
        self.peak = max(self.peak, self.s.rank)

    def values(self, slot: int) -> List[int]:
        return [t[slot] for t in self.s.terms]

    def split(self, idx: int, slot: int, donor: int) -> int:
        """Split term ``idx`` by ``donor``; return the remainder's index."""
        self.do(("split", slot, idx, donor))
        return self.s.rank - 1

    def tidy(self, start: int, head: int) -> None:
        """Greedily reduce terms at positions >= start (pairwise, then grouped).

        Positions below ``head`` may absorb a merge but are never deleted, so
        the head keeps its length.
        """
        while True:
            live = range(start, self.s.rank)
            pair = next(
                ((i, j) for i in live for j in range(max(i + 1, head), self.s.rank)
                 if len(shared_slots(self.s.terms[i], self.s.terms[j])) == 2),
                None,
            )
            if pair is None:
                # exact duplicates vanish together, so both must be in the tail
                tail = range(max(start, head), self.s.rank)
                pair = next(
                    ((i, j) for i in tail for j in range(i + 1, self.s.rank)
                     if self.s.terms[i] == self.s.terms[j]),
                    None,
                )
            if pair is not None:
                self.do(("reduce",) + pair)
                continue
            group = None
            for slot, members in reduction_groups(self.s, live):
                kept = len(gf2_rank_one_factorization(group_matrix(self.s, slot, members)))
                if kept < len(members) and sum(i < head for i in members) <= kept:
                    group = (slot, tuple(members))
                    break
            if group is None:
                return
            self.do(("greduce",) + group)


def _assign_targets(src: Scheme, dst: Scheme, variant: int = 0) -> List[Tuple[int, int, int]]:
    """Pair head positions with dst terms, most shared components first.

    ``variant`` (0..3) only changes how ties are broken.
    """
    head = dst.rank
    ks = -1 if variant & 1 else 1
    ds = -1 if variant & 2 else 1
    cands = sorted(
        (-len(shared_slots(src.terms[k], t)), ks * k, ds * d, k, d)
        for k in range(head)
        for d, t in enumerate(dst.terms)
    )
    order: List[Optional[Tuple[int, int, int]]] = [None] * head
    used = set()
    for *_, k, d in cands:
        if order[k] is None and d not in used:
            order[k] = dst.terms[d]
            used.add(d)
    return order


def _rewrite_component(b: _Builder, k: int, slot: int, target: int) -> None:
    """Make term k's ``slot`` component equal ``target`` using splits only."""
    x = b.s.terms[k][slot]
    if x == target:
        return
    vals = b.values(slot)
    if target not in vals:
        distinct = [x] + sorted(set(vals) - {x})
        basis = [distinct[i] for i in independent_subset(distinct)]
        length = b.s.lengths[slot]
        coeffs = gf2_solve(GF2Matrix(tuple(basis), length), BitVector(target, length))
        if coeffs is None:
            raise PathError("target component outside the span of current components")
        donors = [basis[i] for i in range(1, len(basis)) if coeffs[i]]
        if not coeffs[0]:
            # target avoids x: move term k onto the first donor, then chain from there
            b.split(k, slot, donors[0])
            donors = donors[1:]
        # term k holds v; each split below XORs one more donor into the fresh remainder
        holder = k
        for d in donors:
            holder = b.split(holder, slot, d)
        assert b.s.terms[holder][slot] == target
    b.split(k, slot, target)


def _merge_aligned(b: _Builder, start: int, slot: int, bset: set) -> None:
    """Reduce tail terms whose ``slot`` component is already a basis vector.

    Every reduction used here keeps the shared ``slot`` value, so aligned
    terms stay aligned.
    """
    while True:
        done = [i for i in range(start, b.s.rank) if b.s.terms[i][slot] in bset]
        pair = next(
            ((i, j) for a, i in enumerate(done) for j in done[a + 1 :]
             if slot in shared_slots(b.s.terms[i], b.s.terms[j])
             and len(shared_slots(b.s.terms[i], b.s.terms[j])) >= 2),
            None,
        )
        if pair is not None:
            b.do(("reduce",) + pair)
            continue
        group = None
        for gslot, members in reduction_groups(b.s, done):
            if gslot != slot:
                continue
            if len(gf2_rank_one_factorization(group_matrix(b.s, slot, members))) < len(members):
                group = (slot, tuple(members))
                break
        if group is None:
            return
        b.do(("greduce",) + group)


def _clear_tail(b: _Builder, start: int) -> None:
    """Remove the zero-sum tail beyond position ``start``.

    One slot is expanded over a basis of head components. Once every tail
    term carries a basis vector there, the terms sharing each basis vector
    have zero summed outer product and a grouped reduction deletes them.
    """
    plans = []
    for slot in Slot:
        vals = sorted({t[slot] for t in b.s.terms[:start]})
        basis = [vals[i] for i in independent_subset(vals)]
        mat = GF2Matrix(tuple(basis), b.s.lengths[slot])
        cost = sum(gf2_solve(mat, BitVector(t[slot], mat.cols)).weight() for t in b.s.terms[start:])
        plans.append((cost, slot, basis, mat))
    _, slot, basis, mat = min(plans, key=lambda plan: plan[:2])
    bset = set(basis)
    _merge_aligned(b, start, slot, bset)
    while True:
        idx = next((i for i in range(start, b.s.rank) if b.s.terms[i][slot] not in bset), None)
        if idx is None:
            break
        coeffs = gf2_solve(mat, BitVector(b.s.terms[idx][slot], mat.cols))
        donor = basis[next(i for i in range(len(basis)) if coeffs[i])]
        b.split(idx, slot, donor)
        _merge_aligned(b, start, slot, bset)
    if b.s.rank != start:
        raise PathError("tail does not cancel; schemes are not equivalent")


def rank_bound(src: Scheme, dst: Scheme) -> int:
    la, lb, lc = src.lengths
    return dst.rank + la + lb + lc + src.rank


def connectivity_path(src: Scheme, dst: Scheme) -> MoveScript:
    """Build a move script turning ``src`` into ``dst`` (up to term order)."""
    if src.dims != dst.dims:
        raise PathError(f"dimension mismatch: {src.dims} vs {dst.dims}")
    if src.dims not in PATH_DIMS:
        raise PathError(f"path construction is limited to {sorted(PATH_DIMS)}; got {src.dims}")
    for name, s in (("src", src), ("dst", dst)):
        if not verify(s):
            raise PathError(f"{name} is not a valid scheme")
    script = MoveScript(src.dims, peak_rank=max(src.rank, dst.rank))
    if src.same_terms(dst):
        return script
    # tie-breaking variants can change the peak rank; keep the lowest
    best = min((_build(src, dst, v) for v in range(ASSIGN_VARIANTS)), key=lambda b: (b.peak, len(b.moves)))
    script.moves = best.moves
    script.peak_rank = best.peak
    return script


def _build(src: Scheme, dst: Scheme, variant: int) -> _Builder:
    b = _Builder(src)

    # pad with the first eligible plus until the ranks match
    while b.s.rank < dst.rank:
        plus = enumerate_plus_pairs(b.s)
        if not plus:
            raise PathError("no eligible plus move while padding")
        mv = plus[0]
        b.do(("plus", mv.slot, mv.i, mv.j))

    # rewrite position k into target k, alpha then beta then gamma
    targets = _assign_targets(b.s, dst, variant)
    head = dst.rank
    for k, tgt in enumerate(targets):
        for slot in Slot:
            _rewrite_component(b, k, slot, tgt[slot])
            b.tidy(k + 1, head)
        assert b.s.terms[k] == tuple(tgt)

    # the tail now sums to zero
    if b.s.rank > head:
        _clear_tail(b, head)
    if not b.s.same_terms(dst):
        raise PathError("constructed path does not end at dst")
    return b


def full_component_ranks(s: Scheme) -> bool:
    return component_ranks(s) == s.lengths
