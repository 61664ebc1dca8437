"""Adaptive flip graph search: random walk, plus transitions, edge constraints.

``run`` drives the compiled kernel stage by stage. Between kernel chunks it
records the rank trace, checks the sampled scheme, and writes checkpoints.
Chunk boundaries never consume randomness, so a trajectory depends only on
the parameters, the initial scheme and the seed.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from flipgraph import kernel as K
from flipgraph.rng import RNG_NAME, Xoshiro256, seed_state
from flipgraph.scheme import Scheme, component_ranks, verify

log = logging.getLogger(__name__)

DEFAULT_PLUS_FLAG = 5000
DEFAULT_GR_PERIOD = 1000
DEFAULT_TRACE_STRIDE = 1000
DENSE_TRACE_LIMIT = 10_000


class InvariantError(RuntimeError):
    """A sampled scheme failed verification or the rank bookkeeping."""


@dataclass(frozen=True)
class Constraint:
    n: int
    m: int
    p: int

    def masks(self, dims: Tuple[int, int, int]) -> Tuple[int, int, int]:
        """Allowed supports of alpha, beta and gamma inside the box."""
        n, m, p = dims
        if not (1 <= self.n <= n and 1 <= self.m <= m and 1 <= self.p <= p):
            raise ValueError(f"constraint {self} does not fit dims {dims}")
        ma = mb = mc = 0
        for i in range(self.n):
            for j in range(self.m):
                ma |= 1 << (i * m + j)
        for j in range(self.m):
            for k in range(self.p):
                mb |= 1 << (j * p + k)
        for k in range(self.p):
            for i in range(self.n):
                mc |= 1 << (k * n + i)
        return ma, mb, mc

    def contains(self, s: Scheme) -> bool:
        ma, mb, mc = self.masks(s.dims)
        return all(not (a & ~ma or b & ~mb or c & ~mc) for a, b, c in s.terms)

    def __str__(self) -> str:
        return f"{self.n}x{self.m}x{self.p}"


Schedule = List[Tuple[Constraint, int]]


def constraint_chain(n: int, m: int, p: int) -> List[Constraint]:
    """Boxes from (2,2,2) up to (n,m,p), growing the smallest short axis each time."""
    if min(n, m, p) < 2:
        raise ValueError(f"dims must be >= 2, got {(n, m, p)}")
    box = [2, 2, 2]
    target = [n, m, p]
    chain = [Constraint(*box)]
    for _ in range(n + m + p - 6):
        short = [ax for ax in range(3) if box[ax] < target[ax]]
        ax = min(short, key=lambda a: (box[a], a))
        box[ax] += 1
        chain.append(Constraint(*box))
    return chain


def log_split(total: int, parts: int) -> List[int]:
    """Stage budgets whose cumulative split points are log-spaced.

    The split points run geometrically from ``total / parts`` up to ``total``,
    so the first stage gets an even share and later stages grow by a constant
    factor.
    """
    if parts <= 0:
        raise ValueError("need at least one part")
    if parts == 1 or total <= 0:
        return [max(total, 0)] + [0] * (parts - 1)
    first = total / parts
    cuts = [0] + [int(round(first * parts ** (i / (parts - 1)))) for i in range(parts - 1)] + [total]
    for i in range(1, len(cuts)):
        cuts[i] = min(max(cuts[i], cuts[i - 1]), total)
    return [b - a for a, b in zip(cuts, cuts[1:])]


def default_schedule(n: int, m: int, p: int, total_budget: int) -> Schedule:
    chain = constraint_chain(n, m, p)
    return list(zip(chain, log_split(total_budget, len(chain))))


def unconstrained_schedule(n: int, m: int, p: int, total_budget: int) -> Schedule:
    return [(Constraint(n, m, p), total_budget)]


@dataclass
class SearchParams:
    dims: Tuple[int, int, int]
    schedule: Schedule
    seed: int = 0
    plus_flag: int = DEFAULT_PLUS_FLAG
    plus_enabled: bool = True
    plus_in_constrained: bool = False
    restarts: int = 1
    gr_period: int = DEFAULT_GR_PERIOD
    checkpoint_every: int = 0
    trace_stride: int = DEFAULT_TRACE_STRIDE
    target_rank: int = 0
    check: bool = True
    audit: bool = False

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.schedule = [(c if isinstance(c, Constraint) else Constraint(*c), int(b)) for c, b in self.schedule]
        if not self.schedule:
            raise ValueError("schedule must not be empty")
        if self.schedule[-1][0] != Constraint(*self.dims):
            raise ValueError("the last schedule stage must be the unconstrained box")
        if any(b < 0 for _, b in self.schedule):
            raise ValueError("stage budgets must be non-negative")
        if self.plus_flag < 1:
            raise ValueError("plus flag must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.trace_stride < 1:
            raise ValueError("trace stride must be >= 1")
        for c, _ in self.schedule:
            c.masks(self.dims)

    @property
    def iterations_per_pass(self) -> int:
        return sum(b for _, b in self.schedule)

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["schedule"] = [[c.n, c.m, c.p, b] for c, b in self.schedule]
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> "SearchParams":
        d = dict(d)
        d["schedule"] = [(Constraint(*e[:3]), e[3]) for e in d["schedule"]]
        return cls(**d)


@dataclass
class SearchStats:
    records: List[Tuple[int, int, int]] = field(default_factory=list)
    counters: Dict[str, int] = field(default_factory=dict)
    duration: float = 0.0
    iterations: int = 0
    checks: int = 0

    @property
    def best_ranks(self) -> List[int]:
        return [r[2] for r in self.records]

    def best_at(self, iteration: int) -> int:
        """Best rank recorded at or before ``iteration``."""
        best = None
        for it, _, b in self.records:
            if it > iteration:
                break
            best = b
        if best is None:
            raise ValueError(f"no trace record at or before iteration {iteration}")
        return best


def trace_points_below(limit: int) -> List[int]:
    pts = sorted({int(round(10 ** (k / 10))) for k in range(0, 10 * int(math.log10(limit)) + 1)})
    return [t for t in pts if t < limit]


_DENSE = trace_points_below(DENSE_TRACE_LIMIT)


def next_trace_point(t: int, stride: int) -> int:
    """Smallest trace iteration strictly greater than ``t``."""
    nxt = (t // stride + 1) * stride
    for d in _DENSE:
        if d > t:
            return min(d, nxt)
    return nxt


class KernelState:
    """Mutable arrays backing one trajectory."""

    def __init__(self, scheme: Scheme, capacity: Optional[int] = None):
        self.dims = scheme.dims
        r = scheme.rank
        self.cap = capacity or max(2 * r, r + 64)
        if r > self.cap:
            raise ValueError("capacity below scheme rank")
        hbits = max(4, int(math.ceil(math.log2(4 * self.cap))))
        self.T = np.zeros((3, self.cap), dtype=np.uint64)
        self.best = np.zeros((3, self.cap), dtype=np.uint64)
        self.keys = np.zeros((3, 1 << hbits), dtype=np.uint64)
        self.cnt = np.zeros((3, 1 << hbits), dtype=np.int64)
        self.hist = np.zeros((3, self.cap + 2), dtype=np.int64)
        self.st = np.zeros(K.NSTATE, dtype=np.int64)
        self.ctr = np.zeros(K.NCOUNTERS, dtype=np.int64)
        self.lengths = np.array(scheme.lengths, dtype=np.int64)
        self.st[K.HBITS] = hbits
        self.load(scheme)
        self.st[K.BEST_R] = r
        self.best[:, :r] = self.T[:, :r]

    def load(self, scheme: Scheme, na: Optional[int] = None) -> None:
        r = scheme.rank
        if r > self.cap:
            raise ValueError("scheme rank exceeds capacity")
        self.T[:, :] = 0
        for idx, t in enumerate(scheme.terms):
            self.T[:, idx] = t
        self.st[K.R] = r
        self.st[K.NA] = r if na is None else na
        self.rebuild()

    def rebuild(self) -> None:
        K.rebuild_tables(self.T, self.keys, self.cnt, self.hist, self.st)

    def constrain(self, box: Constraint) -> None:
        masks = np.array(box.masks(self.dims), dtype=np.uint64)
        K.partition_active(self.T, self.st, masks)
        self.rebuild()
        K.reduce_all(self.T, self.keys, self.cnt, self.hist, self.st, self.ctr)

    @property
    def rank(self) -> int:
        return int(self.st[K.R])

    @property
    def active(self) -> int:
        return int(self.st[K.NA])

    @property
    def best_rank(self) -> int:
        return int(self.st[K.BEST_R])

    def _scheme_from(self, arr: np.ndarray, r: int) -> Scheme:
        n, m, p = self.dims
        terms = [(int(arr[0, i]), int(arr[1, i]), int(arr[2, i])) for i in range(r)]
        return Scheme(n, m, p, tuple(terms))

    def scheme(self) -> Scheme:
        return self._scheme_from(self.T, self.rank)

    def best_scheme(self) -> Scheme:
        return self._scheme_from(self.best, self.best_rank)

    def counters(self) -> Dict[str, int]:
        return {name: int(v) for name, v in zip(K.COUNTER_NAMES, self.ctr)}


def random_search_step(s: Scheme, rng: Xoshiro256, constraint: Optional[Constraint] = None) -> Scheme:
    """One random active flip followed by exhaustive pairwise reductions.

    Returns ``s`` itself when no active flip exists. Otherwise the result
    lists the active terms first.
    """
    ks = KernelState(s)
    masks = np.array((constraint or Constraint(*s.dims)).masks(s.dims), dtype=np.uint64)
    K.partition_active(ks.T, ks.st, masks)
    ks.rebuild()
    if not K.random_flip(ks.T, ks.keys, ks.cnt, ks.hist, ks.st, ks.ctr, rng.state):
        return s
    K.reduce_all(ks.T, ks.keys, ks.cnt, ks.hist, ks.st, ks.ctr)
    return ks.scheme()


def check_scheme(s: Scheme) -> None:
    if not verify(s):
        raise InvariantError(f"scheme of rank {s.rank} does not verify")
    if component_ranks(s) != s.lengths:
        raise InvariantError(f"component ranks {component_ranks(s)} != {s.lengths}")


def accounted_rank(base_rank: int, ctr_now: np.ndarray, ctr_base: np.ndarray) -> int:
    """Rank predicted from the move counters since ``ctr_base``."""
    d = ctr_now - ctr_base
    return int(
        base_rank + d[K.C_PLUS] - d[K.C_RED1] - 2 * d[K.C_RED2] - d[K.C_GREMOVED]
    )


class Search:
    """One deterministic run, resumable from a snapshot."""

    def __init__(self, params: SearchParams, initial: Scheme):
        if initial.dims != params.dims:
            raise ValueError(f"initial dims {initial.dims} != params dims {params.dims}")
        if not verify(initial):
            raise ValueError("initial scheme does not verify")
        self.params = params
        self.initial = initial
        self.ks = KernelState(initial)
        self.rng = Xoshiro256(params.seed)
        self.stats = SearchStats()
        self.pass_idx = 0
        self.stage_idx = 0
        self.stage_iter = 0
        self.stage_started = False
        self.iteration = 0
        self.base_rank = initial.rank
        self.base_ctr = self.ks.ctr.copy()
        self.finished = False
        self.elapsed = 0.0

    # -- bookkeeping -------------------------------------------------------

    def _record(self) -> None:
        rec = (self.iteration, self.ks.rank, self.ks.best_rank)
        if self.stats.records and self.stats.records[-1][0] == rec[0]:
            self.stats.records[-1] = rec
        else:
            self.stats.records.append(rec)

    def _check(self) -> None:
        if not self.params.check:
            return
        check_scheme(self.ks.scheme())
        expected = accounted_rank(self.base_rank, self.ks.ctr, self.base_ctr)
        if expected != self.ks.rank:
            raise InvariantError(f"rank {self.ks.rank} != {expected} predicted by the move counts")
        self.stats.checks += 1

    def _rebase(self) -> None:
        self.base_rank = self.ks.rank
        self.base_ctr = self.ks.ctr.copy()

    def _entry_stage(self, s: Scheme) -> int:
        for idx, (box, _) in enumerate(self.params.schedule):
            if box.contains(s):
                return idx
        return len(self.params.schedule) - 1

    def _start_stage(self) -> None:
        box, _ = self.params.schedule[self.stage_idx]
        self.ks.constrain(box)
        self.ks.st[K.LCOUNT] = 0
        self.stage_iter = 0
        self.stage_started = True
        self._record()

    def _plus_active(self) -> bool:
        if not self.params.plus_enabled:
            return False
        last = self.stage_idx == len(self.params.schedule) - 1
        return last or self.params.plus_in_constrained

    # -- driving -----------------------------------------------------------

    def run(self, checkpoint_path: Optional[Path] = None) -> Tuple[Scheme, SearchStats]:
        from flipgraph.formats import write_snapshot

        p = self.params
        t_start = time.perf_counter() - self.elapsed
        if not self.stats.records:
            self._record()
            self._check()
        next_ckpt = self._next_checkpoint() if checkpoint_path is not None else 0
        while not self.finished:
            if not self.stage_started:
                if self.stage_idx == 0 and self.pass_idx > 0:
                    self.ks.load(self.ks.best_scheme())
                    self.stage_idx = self._entry_stage(self.ks.best_scheme())
                self._start_stage()
                self._rebase()
            box, budget = p.schedule[self.stage_idx]
            while self.stage_iter < budget:
                chunk_end = min(
                    self.iteration + (budget - self.stage_iter),
                    next_trace_point(self.iteration, p.trace_stride),
                )
                if p.audit:
                    chunk_end = self.iteration + 1
                if next_ckpt:
                    chunk_end = min(chunk_end, next_ckpt)
                n = chunk_end - self.iteration
                done = K.run_iterations(
                    self.ks.T, self.ks.keys, self.ks.cnt, self.ks.hist, self.ks.st, self.ks.ctr,
                    self.rng.state, self.ks.best, self.ks.lengths, self.ks.cap,
                    self.iteration, n, p.plus_flag, self._plus_active(), p.gr_period,
                    p.target_rank,
                )
                self.iteration += done
                self.stage_iter += done
                self._record()
                if p.audit or next_trace_point(self.iteration - 1, p.trace_stride) == self.iteration:
                    self._check()
                if done < n:
                    self.finished = True
                    break
                if next_ckpt and self.iteration >= next_ckpt:
                    self.elapsed = time.perf_counter() - t_start
                    write_snapshot(checkpoint_path, self.snapshot())
                    next_ckpt = self._next_checkpoint()
            if self.finished:
                break
            self.stage_started = False
            self.stage_idx += 1
            if self.stage_idx == len(p.schedule):
                self.stage_idx = 0
                self.pass_idx += 1
                if self.pass_idx == p.restarts:
                    self.finished = True
        self._record()
        self._check()
        self.elapsed = time.perf_counter() - t_start
        self.stats.duration = self.elapsed
        self.stats.iterations = self.iteration
        self.stats.counters = self.ks.counters()
        best = self.ks.best_scheme()
        check_scheme(best)
        if checkpoint_path is not None:
            write_snapshot(checkpoint_path, self.snapshot())
        return best, self.stats

    def _next_checkpoint(self) -> int:
        every = self.params.checkpoint_every
        if every <= 0:
            return 0
        return (self.iteration // every + 1) * every

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> Dict:
        """Everything needed to continue this run bit-for-bit."""
        cur = self.ks.scheme()
        if not verify(cur):
            raise InvariantError("refusing to snapshot an invalid scheme")
        return {
            "params": self.params.to_dict(),
            "rng": {"name": RNG_NAME, "state": self.rng.getstate()},
            "scheme": [list(t) for t in cur.terms],
            "active": self.ks.active,
            "best": [list(t) for t in self.ks.best_scheme().terms],
            "initial": [list(t) for t in self.initial.terms],
            "plus_counter": int(self.ks.st[K.LCOUNT]),
            "counters": [int(c) for c in self.ks.ctr],
            "base_rank": self.base_rank,
            "base_counters": [int(c) for c in self.base_ctr],
            "position": {
                "pass": self.pass_idx,
                "stage": self.stage_idx,
                "stage_iter": self.stage_iter,
                "stage_started": self.stage_started,
                "iteration": self.iteration,
                "finished": self.finished,
            },
            "trace": [list(r) for r in self.stats.records],
            "checks": self.stats.checks,
            "elapsed": self.elapsed,
        }

    @classmethod
    def restore(cls, snap: Dict) -> "Search":
        params = SearchParams.from_dict(snap["params"])
        n, m, p = params.dims
        initial = Scheme(n, m, p, tuple(tuple(t) for t in snap["initial"]))
        self = cls(params, initial)
        cur = Scheme(n, m, p, tuple(tuple(t) for t in snap["scheme"]))
        best = Scheme(n, m, p, tuple(tuple(t) for t in snap["best"]))
        if snap["rng"]["name"] != RNG_NAME:
            raise ValueError(f"snapshot uses generator {snap['rng']['name']!r}, need {RNG_NAME!r}")
        self.ks.load(best)
        self.ks.best[:, :] = 0
        self.ks.best[:, : best.rank] = self.ks.T[:, : best.rank]
        self.ks.st[K.BEST_R] = best.rank
        self.ks.load(cur, na=int(snap["active"]))
        self.ks.st[K.LCOUNT] = int(snap["plus_counter"])
        self.ks.ctr[:] = np.array(snap["counters"], dtype=np.int64)
        self.base_rank = int(snap["base_rank"])
        self.base_ctr = np.array(snap["base_counters"], dtype=np.int64)
        self.rng.setstate(snap["rng"]["state"])
        pos = snap["position"]
        self.pass_idx = int(pos["pass"])
        self.stage_idx = int(pos["stage"])
        self.stage_iter = int(pos["stage_iter"])
        self.stage_started = bool(pos["stage_started"])
        self.iteration = int(pos["iteration"])
        self.finished = bool(pos["finished"])
        self.stats.records = [tuple(r) for r in snap["trace"]]
        self.stats.checks = int(snap["checks"])
        self.elapsed = float(snap["elapsed"])
        return self


def run(params: SearchParams, initial: Scheme, checkpoint_path: Optional[Path] = None):
    """Run a full search; returns (best scheme, stats)."""
    return Search(params, initial).run(checkpoint_path)


def make_params(
    dims: Sequence[int],
    iterations: int,
    *,
    schedule: str = "auto",
    **kwargs,
) -> SearchParams:
    n, m, p = dims
    if schedule == "auto":
        sched = default_schedule(n, m, p, iterations)
    elif schedule == "none":
        sched = unconstrained_schedule(n, m, p, iterations)
    else:
        raise ValueError(f"unknown schedule {schedule!r}")
    return SearchParams(dims=(n, m, p), schedule=sched, **kwargs)
