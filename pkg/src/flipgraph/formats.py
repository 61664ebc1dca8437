"""On-disk formats: scheme files, move scripts, traces, manifests, snapshots.

Scheme file (ASCII, ``\\n`` line ends)::

    mms 1
    dims <n> <m> <p>
    rank <r>
    <alpha-bits> <beta-bits> <gamma-bits>     (r lines)

Bit strings list coefficient 0 first, in the flattening layout of
``flipgraph.scheme``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from flipgraph.gf2 import bits_to_str, str_to_bits
from flipgraph.moves import Slot
from flipgraph.scheme import Scheme, check_dims, verify

SCHEME_MAGIC = "mms"
SCHEME_VERSION = 1
SCRIPT_MAGIC = "mss"
SCRIPT_VERSION = 1
SNAPSHOT_MAGIC = "flipgraph-snapshot"
SNAPSHOT_VERSION = 1
TRACE_HEADER = ("iteration", "current_rank", "best_rank")

PathLike = Union[str, Path]


class SchemeFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class HeaderError(SchemeFormatError):
    pass


class BitLengthError(SchemeFormatError):
    pass


class ZeroComponentError(SchemeFormatError):
    pass


class VerificationError(SchemeFormatError):
    pass


class SnapshotError(ValueError):
    """A checkpoint failed one of its integrity checks."""


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- schemes ---------------------------------------------------------------


def serialize_scheme(s: Scheme) -> str:
    la, lb, lc = s.lengths
    lines = [f"{SCHEME_MAGIC} {SCHEME_VERSION}", f"dims {s.n} {s.m} {s.p}", f"rank {s.rank}"]
    for a, b, c in s.terms:
        lines.append(f"{bits_to_str(a, la)} {bits_to_str(b, lb)} {bits_to_str(c, lc)}")
    return "\n".join(lines) + "\n"


def _header(lines: List[str], idx: int, key: str, count: int) -> List[int]:
    if idx >= len(lines):
        raise HeaderError(idx + 1, f"missing '{key}' line")
    parts = lines[idx].split()
    if len(parts) != count + 1 or parts[0] != key:
        raise HeaderError(idx + 1, f"expected '{key}' followed by {count} integer(s)")
    try:
        return [int(x) for x in parts[1:]]
    except ValueError:
        raise HeaderError(idx + 1, f"non-integer value in '{key}' line") from None


def parse_scheme(text: str, check: bool = True) -> Scheme:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    (version,) = _header(lines, 0, SCHEME_MAGIC, 1)
    if version != SCHEME_VERSION:
        raise HeaderError(1, f"unsupported version {version}")
    n, m, p = _header(lines, 1, "dims", 3)
    try:
        check_dims(n, m, p)
    except ValueError as exc:
        raise HeaderError(2, str(exc)) from None
    (rank,) = _header(lines, 2, "rank", 1)
    if rank < 0:
        raise HeaderError(3, "negative rank")
    lengths = (n * m, m * p, p * n)
    terms = []
    for k in range(rank):
        lineno = 4 + k
        if 3 + k >= len(lines):
            raise HeaderError(lineno, f"missing term line {k + 1} of {rank}")
        parts = lines[3 + k].split()
        if len(parts) != 3:
            raise BitLengthError(lineno, "expected three bit strings")
        comps = []
        for part, length, name in zip(parts, lengths, ("alpha", "beta", "gamma")):
            if len(part) != length or set(part) - {"0", "1"}:
                raise BitLengthError(lineno, f"{name} must be {length} characters of 0/1, got {part!r}")
            bits = str_to_bits(part)
            if bits == 0:
                raise ZeroComponentError(lineno, f"{name} component is zero")
            comps.append(bits)
        terms.append(tuple(comps))
    if len(lines) > 3 + rank:
        raise HeaderError(4 + rank, "unexpected content after the last term")
    s = Scheme(n, m, p, tuple(terms))
    if check and not verify(s):
        raise VerificationError(3 + rank, "terms do not sum to the multiplication tensor")
    return s


def write_scheme(path: PathLike, s: Scheme) -> None:
    atomic_write_text(path, serialize_scheme(s))


def read_scheme(path: PathLike, check: bool = True) -> Scheme:
    return parse_scheme(Path(path).read_text(), check=check)


# -- move scripts ----------------------------------------------------------

Move = Tuple  # (kind, *args)


def _slot_name(slot: int) -> str:
    return Slot(slot).name.lower()


def _slot_of(name: str, lineno: int) -> Slot:
    try:
        return Slot[name.upper()]
    except KeyError:
        raise SchemeFormatError(lineno, f"unknown slot {name!r}") from None


def serialize_script(dims: Tuple[int, int, int], moves: Sequence[Move]) -> str:
    n, m, p = dims
    lengths = (n * m, m * p, p * n)
    lines = [f"{SCRIPT_MAGIC} {SCRIPT_VERSION}", f"dims {n} {m} {p}", f"moves {len(moves)}"]
    for mv in moves:
        kind = mv[0]
        if kind in ("flip", "plus"):
            _, slot, i, j = mv
            lines.append(f"{kind} {_slot_name(slot)} {i} {j}")
        elif kind == "reduce":
            _, i, j = mv
            lines.append(f"reduce {i} {j}")
        elif kind == "greduce":
            _, slot, members = mv
            lines.append(f"greduce {_slot_name(slot)} " + " ".join(str(i) for i in members))
        elif kind == "split":
            _, slot, idx, donor = mv
            lines.append(f"split {_slot_name(slot)} {idx} {bits_to_str(donor, lengths[slot])}")
        else:
            raise ValueError(f"unknown move kind {kind!r}")
    return "\n".join(lines) + "\n"


def parse_script(text: str) -> Tuple[Tuple[int, int, int], List[Move]]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    (version,) = _header(lines, 0, SCRIPT_MAGIC, 1)
    if version != SCRIPT_VERSION:
        raise HeaderError(1, f"unsupported version {version}")
    dims = tuple(_header(lines, 1, "dims", 3))
    (count,) = _header(lines, 2, "moves", 1)
    if len(lines) != 3 + count:
        raise HeaderError(3, f"declared {count} moves but found {len(lines) - 3} lines")
    moves: List[Move] = []
    for k, line in enumerate(lines[3:]):
        lineno = 4 + k
        parts = line.split()
        try:
            kind = parts[0]
            if kind in ("flip", "plus") and len(parts) == 4:
                moves.append((kind, _slot_of(parts[1], lineno), int(parts[2]), int(parts[3])))
            elif kind == "reduce" and len(parts) == 3:
                moves.append(("reduce", int(parts[1]), int(parts[2])))
            elif kind == "greduce" and len(parts) >= 4:
                moves.append(("greduce", _slot_of(parts[1], lineno), tuple(int(x) for x in parts[2:])))
            elif kind == "split" and len(parts) == 4:
                moves.append(("split", _slot_of(parts[1], lineno), int(parts[2]), str_to_bits(parts[3])))
            else:
                raise SchemeFormatError(lineno, f"malformed move {line!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, SchemeFormatError):
                raise
            raise SchemeFormatError(lineno, f"malformed move {line!r}") from None
    return dims, moves


# -- traces and manifests --------------------------------------------------


def write_trace(path: PathLike, records: Iterable[Sequence[int]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for rec in records:
        w.writerow([int(x) for x in rec])
    atomic_write_text(path, buf.getvalue())


def read_trace(path: PathLike) -> List[Tuple[int, int, int]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise ValueError(f"{path}: trace header must be {','.join(TRACE_HEADER)}")
    return [(int(a), int(b), int(c)) for a, b, c in rows[1:]]


def write_manifest(path: PathLike, entries: Dict[str, object]) -> None:
    lines = [f"{k}={v}" for k, v in entries.items()]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path: PathLike) -> Dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# -- snapshots -------------------------------------------------------------


def _digest(body: Dict) -> str:
    blob = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def write_snapshot(path: PathLike, body: Dict) -> None:
    doc = {
        "magic": SNAPSHOT_MAGIC,
        "version": SNAPSHOT_VERSION,
        "sha256": _digest(body),
        "body": body,
    }
    atomic_write_text(path, json.dumps(doc, sort_keys=True) + "\n")


def read_snapshot(path: PathLike) -> Dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"json: snapshot is not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("magic") != SNAPSHOT_MAGIC:
        raise SnapshotError("magic: not a flipgraph snapshot")
    if doc.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"version: unsupported snapshot version {doc.get('version')!r}")
    body = doc.get("body")
    if not isinstance(body, dict) or doc.get("sha256") != _digest(body):
        raise SnapshotError("sha256: snapshot body does not match its digest")
    params = body["params"]
    n, m, p = params["dims"]
    for key in ("scheme", "best", "initial"):
        s = Scheme(n, m, p, tuple(tuple(t) for t in body[key]))
        if not verify(s):
            raise SnapshotError(f"{key}: stored scheme does not verify")
    if not any(body["rng"]["state"]):
        raise SnapshotError("rng: generator state is all zero")
    return body
