"""Command-line interface: ``flipgraph search|verify|rank|path|plot``.

Exit codes: 0 success, 1 validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from flipgraph import __version__
from flipgraph.formats import (
    SchemeFormatError,
    SnapshotError,
    read_manifest,
    read_scheme,
    read_snapshot,
    read_trace,
    serialize_script,
    parse_script,
    write_manifest,
    write_scheme,
    write_trace,
)
from flipgraph.rng import RNG_NAME, derive_seed
from flipgraph.scheme import Scheme, check_dims, standard_scheme, verify
from flipgraph.search import (
    Constraint,
    InvariantError,
    Search,
    SearchParams,
    default_schedule,
    unconstrained_schedule,
)
from flipgraph.witness import BRUTE_FORCE_LIMIT, MoveScript, PathError, brute_force_verify, connectivity_path

log = logging.getLogger("flipgraph")

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_dims(text: str) -> Tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise UsageError(f"--dims must look like NxMxP, got {text!r}")
    try:
        dims = tuple(int(x) for x in parts)
    except ValueError:
        raise UsageError(f"--dims must look like NxMxP, got {text!r}") from None
    try:
        check_dims(*dims)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return dims


def read_schedule_file(path: Path, dims: Tuple[int, int, int]):
    """One stage per line: ``<n>x<m>x<p> <budget>``; '#' starts a comment."""
    stages = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise UsageError(f"{path}:{lineno}: expected '<n>x<m>x<p> <budget>'")
        box = parse_dims(parts[0])
        try:
            budget = int(parts[1])
        except ValueError:
            raise UsageError(f"{path}:{lineno}: budget must be an integer") from None
        stages.append((Constraint(*box), budget))
    if not stages:
        raise UsageError(f"{path}: schedule file has no stages")
    return stages


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load_init(spec: str, dims: Tuple[int, int, int]) -> Scheme:
    if spec == "standard":
        return standard_scheme(*dims)
    s = read_scheme(spec)
    if s.dims != dims:
        raise UsageError(f"--init scheme has dims {s.dims}, expected {dims}")
    return s


def _job(args) -> Tuple[List[Tuple[int, int, int]], list, dict, float, int]:
    params_dict, init_terms = args
    params = SearchParams.from_dict(params_dict)
    init = Scheme(*params.dims, tuple(tuple(t) for t in init_terms))
    best, stats = Search(params, init).run()
    return [tuple(t) for t in best.terms], stats.records, stats.counters, stats.duration, stats.iterations


def _paths(args) -> Tuple[Path, Path, Path]:
    out = Path(args.out)
    trace = Path(args.trace) if args.trace else out.with_suffix(".trace.csv")
    manifest = Path(args.manifest) if args.manifest else out.with_suffix(".manifest")
    return out, trace, manifest


def _build_params(args) -> Tuple[SearchParams, str]:
    if args.replay:
        man = read_manifest(args.replay)
        if man.get("rng") != RNG_NAME:
            raise UsageError(f"manifest generator {man.get('rng')!r} differs from {RNG_NAME!r}")
        params = SearchParams.from_dict(json.loads(man["params"]))
        init = man.get("init", "standard")
        if init.startswith("snapshot:"):
            raise UsageError("a resumed run cannot be replayed; replay the manifest of the original run")
        if init != "standard" and _sha256(Path(init)) != man.get("init_sha256"):
            raise UsageError(f"initial scheme {init} changed since the manifest was written")
        args.jobs = int(man.get("jobs", 1))
        return params, init
    if args.dims is None:
        raise UsageError("--dims is required (unless --resume or --replay is given)")
    dims = parse_dims(args.dims)
    if min(dims) < 2:
        raise UsageError(f"search needs every dimension >= 2, got {args.dims}")
    if args.schedule == "auto":
        sched = default_schedule(*dims, args.iters)
    elif args.schedule == "none":
        sched = unconstrained_schedule(*dims, args.iters)
    else:
        if args.iters_given:
            raise UsageError("--iters conflicts with a schedule file; budgets come from the file")
        sched = read_schedule_file(Path(args.schedule), dims)
    try:
        params = SearchParams(
            dims=dims,
            schedule=sched,
            seed=args.seed,
            plus_flag=args.plus_flag,
            plus_enabled=not args.no_plus,
            plus_in_constrained=args.plus_in_constrained,
            restarts=args.restarts,
            gr_period=args.gr_period,
            checkpoint_every=args.checkpoint_every if args.checkpoint else 0,
            trace_stride=args.trace_stride,
            target_rank=args.target_rank,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return params, args.init


def cmd_search(args) -> int:
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if args.jobs > 1 and (args.checkpoint or args.resume):
        raise UsageError("--checkpoint/--resume work with a single job only")
    if args.resume and args.replay:
        raise UsageError("--resume and --replay are mutually exclusive")
    out, trace_path, manifest_path = _paths(args)
    started = _now()
    if args.resume:
        try:
            snap = read_snapshot(args.resume)
        except SnapshotError as exc:
            print(f"error: {args.resume}: {exc}", file=sys.stderr)
            return EXIT_INVALID
        search = Search.restore(snap)
        params, init_spec = search.params, "snapshot:" + str(args.resume)
        if args.dims and parse_dims(args.dims) != params.dims:
            raise UsageError(f"--dims {args.dims} does not match the checkpoint {params.dims}")
        best, stats = search.run(Path(args.checkpoint or args.resume))
        runs = [(params.seed, best, stats.records, stats.counters, stats.duration, stats.iterations)]
    else:
        params, init_spec = _build_params(args)
        init = _load_init(init_spec, params.dims)
        if args.jobs == 1:
            search = Search(params, init)
            ckpt = Path(args.checkpoint) if args.checkpoint else None
            best, stats = search.run(ckpt)
            runs = [(params.seed, best, stats.records, stats.counters, stats.duration, stats.iterations)]
        else:
            seeds = [derive_seed(params.seed, k) for k in range(args.jobs)]
            jobs = []
            for sd in seeds:
                d = params.to_dict()
                d["seed"] = sd
                jobs.append((d, [list(t) for t in init.terms]))
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_job, jobs))
            runs = []
            for sd, (terms, recs, ctr, dur, its) in zip(seeds, results):
                runs.append((sd, Scheme(*params.dims, tuple(terms)), recs, ctr, dur, its))
    # best-of reduction; ties go to the lowest job index
    win = min(range(len(runs)), key=lambda k: (runs[k][1].rank, k))
    seed, best, records, counters, duration, iterations = runs[win]
    write_scheme(out, best)
    write_trace(trace_path, records)
    entries = {
        "tool": "flipgraph",
        "version": __version__,
        "rng": RNG_NAME,
        "seed": params.seed,
        "dims": "x".join(map(str, params.dims)),
        "params": json.dumps(params.to_dict(), sort_keys=True),
        "init": init_spec,
        "started": started,
        "finished": _now(),
        "duration_s": f"{sum(r[4] for r in runs):.3f}",
        "iterations": iterations,
        "jobs": len(runs),
        "job_seeds": ",".join(str(r[0]) for r in runs),
        "job_best_ranks": ",".join(str(r[1].rank) for r in runs),
        "winning_job": win,
        "best_rank": best.rank,
        "counters": json.dumps(counters, sort_keys=True),
        "out": str(out),
        "trace": str(trace_path),
    }
    if init_spec not in ("standard",) and not init_spec.startswith("snapshot:"):
        entries["init_sha256"] = _sha256(Path(init_spec))
    if args.checkpoint:
        entries["checkpoint"] = args.checkpoint
    if args.report:
        from flipgraph.report import plot_best_rank

        png, csv_path = plot_best_rank(
            {f"seed {seed}": [records]}, trace_path.with_suffix(".png"), title="x".join(map(str, params.dims))
        )
        entries["figure"] = str(png)
    write_manifest(manifest_path, entries)
    print(f"best rank {best.rank} after {iterations} iterations ({duration:.2f} s)")
    print(f"wrote {out}, {trace_path}, {manifest_path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        s = read_scheme(args.scheme, check=False)
    except SchemeFormatError as exc:
        print(f"error: {args.scheme}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    ok = verify(s)
    n, m, p = s.dims
    brute = None
    if n * m + m * p <= BRUTE_FORCE_LIMIT and not args.fast:
        brute = brute_force_verify(s)
        ok = ok and brute
    extra = "" if brute is None else f", brute force {'ok' if brute else 'FAILED'}"
    print(f"{args.scheme}: {n}x{m}x{p} rank {s.rank}: {'valid' if ok else 'INVALID'}{extra}")
    return EXIT_OK if ok else EXIT_INVALID


def cmd_rank(args) -> int:
    try:
        s = read_scheme(args.scheme)
    except SchemeFormatError as exc:
        print(f"error: {args.scheme}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(s.rank)
    return EXIT_OK


def cmd_path(args) -> int:
    try:
        src = read_scheme(args.src)
        dst = read_scheme(args.dst)
    except SchemeFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        script = connectivity_path(src, dst)
    except PathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = serialize_script(src.dims, script.moves)
    # replay from the file contents as a self-check
    dims, moves = parse_script(text)
    final = MoveScript(dims, moves).replay(src)
    if not final.same_terms(dst):
        print("error: script does not replay to the destination", file=sys.stderr)
        return EXIT_INVALID
    Path(args.out).write_text(text)
    print(f"{len(moves)} moves, peak rank {script.peak_rank}; replay ok; wrote {args.out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from flipgraph.report import group_by_label, plot_best_rank

    try:
        series = group_by_label([Path(p) for p in args.traces], args.label, read_trace)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    png, csv_path = plot_best_rank(series, Path(args.out), title=args.title or "")
    print(f"wrote {png} and {csv_path}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="flipgraph", description="Flip graph search for GF(2) matrix multiplication schemes.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("search", help="run the adaptive flip graph search")
    s.add_argument("--dims", help="matrix shape NxMxP")
    s.add_argument("--iters", type=int, default=None, help="iterations per pass (default 100000)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--plus-flag", type=int, default=5000, help="plus transition after L steps without a reduction")
    s.add_argument("--no-plus", action="store_true", help="disable plus transitions")
    s.add_argument("--plus-in-constrained", action="store_true", help="also allow plus inside constrained stages")
    s.add_argument("--schedule", default="auto", help="auto, none, or a schedule file")
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--gr-period", type=int, default=1000, help="general reduction every G steps (0 = off)")
    s.add_argument("--trace-stride", type=int, default=1000)
    s.add_argument("--target-rank", type=int, default=0, help="stop as soon as this rank is reached")
    s.add_argument("--init", default="standard", help="'standard' or a scheme file")
    s.add_argument("--out", default="best.mms")
    s.add_argument("--trace", help="trace CSV (default <out>.trace.csv)")
    s.add_argument("--manifest", help="manifest path (default <out>.manifest)")
    s.add_argument("--checkpoint", help="snapshot path written during the run")
    s.add_argument("--checkpoint-every", type=int, default=100_000)
    s.add_argument("--resume", help="continue from a snapshot")
    s.add_argument("--replay", help="rerun the search recorded in a manifest")
    s.add_argument("--jobs", type=int, default=1, help="independent seeded runs in parallel")
    s.add_argument("--report", action="store_true", help="also render the trace as a PNG next to the CSV")
    s.set_defaults(func=cmd_search)

    v = sub.add_parser("verify", help="check a scheme file")
    v.add_argument("scheme")
    v.add_argument("--fast", action="store_true", help="skip the brute-force check")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("rank", help="print the rank of a scheme file")
    r.add_argument("scheme")
    r.set_defaults(func=cmd_rank)

    p = sub.add_parser("path", help="write a move script from one scheme to another")
    p.add_argument("src")
    p.add_argument("dst")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_path)

    pl = sub.add_parser("plot", help="best rank versus iteration from trace CSVs")
    pl.add_argument("traces", nargs="+")
    pl.add_argument("--label", action="append", help="label per trace; equal labels are aggregated")
    pl.add_argument("--title")
    pl.add_argument("--out", default="report.png")
    pl.set_defaults(func=cmd_plot)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "search":
        args.iters_given = args.iters is not None
        if args.iters is None:
            args.iters = 100_000
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"flipgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemeFormatError, SnapshotError, InvariantError) as exc:
        print(f"flipgraph: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"flipgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
