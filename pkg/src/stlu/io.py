"""File formats: flowpipe JSON, trace CSV, model JSON and requirement specs."""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path

from .core import Flowpipe, Trace, validate_flowpipe
from .errors import ParameterError, ParseError, ShapeError
from .formula.nodes import Formula
from .formula.parser import parse
from .predictor import ToyARModel

__all__ = [
    "MODES", "Requirement", "parse_spec", "load_spec", "load_flowpipe", "dump_flowpipe",
    "read_trace_csv", "load_trace", "write_trace_csv", "load_model",
]

MODES = ("strong", "weak", "both", "range")
_ID = re.compile(r"[A-Za-z0-9_.\-]+\Z")


@dataclass(frozen=True)
class Requirement:
    id: str
    mode: str
    text: str
    formula: Formula


def parse_spec(text: str, source: str = "<spec>") -> list[Requirement]:
    """Parse ``id: mode: formula`` lines; blank lines and ``#`` comments are skipped."""
    out, seen = [], set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(":", 2)
        if len(parts) != 3:
            raise ParameterError(f"{source}:{lineno}: expected 'id: mode: formula', got {raw.strip()!r}")
        rid, mode, body = (p.strip() for p in parts)
        if not _ID.match(rid):
            raise ParameterError(f"{source}:{lineno}: bad requirement id {rid!r}")
        if rid in seen:
            raise ParameterError(f"{source}:{lineno}: duplicate requirement id {rid!r}")
        mode = mode.lower()
        if mode not in MODES:
            raise ParameterError(f"{source}:{lineno}: mode must be one of {', '.join(MODES)}, got {mode!r}")
        try:
            phi = parse(body)
        except ParseError as exc:
            raise ParseError(f"{source}:{lineno}: {exc}", exc.position, body) from None
        seen.add(rid)
        out.append(Requirement(rid, mode, body, phi))
    if not out:
        raise ParameterError(f"{source}: no requirements")
    return out


def load_spec(path) -> list[Requirement]:
    path = Path(path)
    return parse_spec(path.read_text(), str(path))


def load_flowpipe(path) -> Flowpipe:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ShapeError(f"{path}: malformed JSON: {exc}") from None
    problems = validate_flowpipe(data)
    if problems:
        raise ShapeError(f"{path}: invalid flowpipe: " + "; ".join(problems))
    return Flowpipe.from_dict(data)


def dump_flowpipe(fp: Flowpipe, path) -> None:
    Path(path).write_text(json.dumps(fp.to_dict(), indent=1) + "\n")


def read_trace_csv(text: str, source: str = "<trace>") -> Trace:
    """Trace from CSV text with header ``t,<var1>,...`` and contiguous integer ``t``."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ShapeError(f"{source}: empty trace file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "t":
        raise ShapeError(f"{source}: header must be 't,<var>,...', got {','.join(header)!r}")
    names = header[1:]
    if len(set(names)) != len(names):
        raise ShapeError(f"{source}: duplicate variable names in header")
    times, cols = [], {n: [] for n in names}
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != len(header):
            raise ShapeError(f"{source}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            times.append(int(row[0]))
            for n, cell in zip(names, row[1:]):
                cols[n].append(float(cell))
        except ValueError as exc:
            raise ShapeError(f"{source}:{lineno}: {exc}") from None
    if not times:
        raise ShapeError(f"{source}: trace has no rows")
    for a, b in zip(times, times[1:]):
        if b != a + 1:
            raise ShapeError(f"{source}: non-contiguous time {a} -> {b}")
    return Trace(cols, times[0])


def load_trace(path) -> Trace:
    path = Path(path)
    return read_trace_csv(path.read_text(), str(path))


def write_trace_csv(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *trace.variables])
        for i, t in enumerate(trace.times):
            w.writerow([t, *(repr(float(trace.values(v)[i])) for v in trace.variables)])


def load_model(path) -> ToyARModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: malformed JSON: {exc}") from None
    return ToyARModel.from_dict(data)
