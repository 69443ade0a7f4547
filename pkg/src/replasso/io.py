"""Text formats used by the command line front end.

Indices in every file are 1-based. Floats are written with ``repr`` so that
they parse back to the identical double.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .model import Breakpoint, EventKind, HomotopyPath, Partition, PathEvent, ValidationError


class ParseError(ValidationError):
    def __init__(self, source, line, message):
        super().__init__(f"{source}:{line}: {message}")
        self.source = str(source)
        self.line = line


def fmt(x: float) -> str:
    return repr(float(x))


def read_matrix(path) -> np.ndarray:
    """Headerless comma separated decimals, one row per line."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            if len(rows[-1]) != len(rows[0]):
                raise ParseError(path, lineno, f"expected {len(rows[0])} columns, found {len(rows[-1])}")
    if not rows:
        raise ParseError(path, 1, "file is empty")
    return np.array(rows)


def read_vector(path) -> np.ndarray:
    m = read_matrix(path)
    if m.shape[1] != 1 and m.shape[0] != 1:
        raise ParseError(path, 1, "expected a single column or a single row")
    return m.ravel()


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w") as fh:
        for row in M:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def parse_partition(text: str, p: int | None = None, source: str = "<partition>") -> Partition:
    """Lines of the form ``group_id: i1,i2,...``; blank lines and ``#`` comments are skipped."""
    groups = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(source, lineno, "expected 'group_id: i1,i2,...'")
        name, rest = line.split(":", 1)
        try:
            idx = [int(tok) - 1 for tok in rest.replace(" ", "").split(",") if tok]
        except ValueError as exc:
            raise ParseError(source, lineno, str(exc)) from None
        if any(i < 0 for i in idx):
            raise ParseError(source, lineno, "indices are 1-based")
        if len(idx) < 2:
            kind = "empty" if not idx else "a singleton"
            raise ParseError(source, lineno, f"group '{name.strip()}' is {kind}")
        groups.append(idx)
    try:
        return Partition(groups, p)
    except ValidationError as exc:
        raise ValidationError(f"{source}: {exc}") from None


def read_partition(path, p: int | None = None) -> Partition:
    return parse_partition(Path(path).read_text(), p, str(path))


def format_partition(partition: Partition) -> str:
    return "".join(f"{k + 1}: {','.join(str(i + 1) for i in g)}\n"
                   for k, g in enumerate(partition.groups))


def _sparse(vec, skip) -> str:
    return ";".join(f"{i + 1}:{fmt(v)}" for i, v in enumerate(vec) if v != skip)


def _unsparse(text: str, p: int, fill: float) -> np.ndarray:
    out = np.full(p, fill)
    for tok in filter(None, text.split(";")):
        i, v = tok.split(":")
        out[int(i) - 1] = float(v)
    return out


PATH_COLUMNS = ["lambda", "event_kind", "event_var", "active_size", "active", "beta", "weights"]


def path_to_records(path: HomotopyPath) -> list:
    recs = []
    for bp in path.breakpoints:
        ev = bp.event
        recs.append({
            "lambda": float(bp.lam),
            "event_kind": ev.kind.value if ev else "END",
            "event_var": ev.variable + 1 if ev else 0,
            "active_size": len(bp.active),
            "active": [i + 1 for i in bp.active],
            "beta": {str(i + 1): float(v) for i, v in enumerate(bp.beta) if v != 0},
            "weights": {str(i + 1): float(v) for i, v in enumerate(bp.weights) if v != 1},
        })
    return recs


def path_to_csv(path: HomotopyPath) -> str:
    p = path.breakpoints[0].beta.size
    buf = io.StringIO()
    buf.write(f"# p={p} truncated={str(path.truncated).lower()} "
              f"final_weights={_sparse(path.final_weights, 1.0)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PATH_COLUMNS)
    for bp in path.breakpoints:
        ev = bp.event
        w.writerow([fmt(bp.lam), ev.kind.value if ev else "END", ev.variable + 1 if ev else 0,
                    len(bp.active), ";".join(str(i + 1) for i in bp.active),
                    _sparse(bp.beta, 0.0), _sparse(bp.weights, 1.0)])
    return buf.getvalue()


def path_to_json(path: HomotopyPath) -> str:
    p = path.breakpoints[0].beta.size
    doc = {"p": p, "truncated": path.truncated,
           "final_weights": {str(i + 1): float(v) for i, v in enumerate(path.final_weights) if v != 1},
           "breakpoints": path_to_records(path)}
    return json.dumps(doc, indent=1) + "\n"


def _event(kind: str, var: int, lam: float):
    if kind == "END":
        return None
    return PathEvent(EventKind(kind), var - 1, lam)


def path_from_csv(text: str) -> HomotopyPath:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ParseError("<path>", 1, "missing '# p=...' header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    p = int(meta["p"])
    reader = csv.DictReader(lines[1:])
    path = HomotopyPath(truncated=meta.get("truncated") == "true",
                        final_weights=_unsparse(meta.get("final_weights", ""), p, 1.0))
    for row in reader:
        lam = float(row["lambda"])
        active = tuple(int(t) - 1 for t in row["active"].split(";") if t)
        path.breakpoints.append(Breakpoint(
            lam, _unsparse(row["beta"], p, 0.0), active, _unsparse(row["weights"], p, 1.0),
            _event(row["event_kind"], int(row["event_var"]), lam)))
    return path


def path_from_json(text: str) -> HomotopyPath:
    doc = json.loads(text)
    p = doc["p"]

    def dense(d, fill):
        out = np.full(p, fill)
        for k, v in d.items():
            out[int(k) - 1] = v
        return out

    path = HomotopyPath(truncated=doc["truncated"], final_weights=dense(doc["final_weights"], 1.0))
    for r in doc["breakpoints"]:
        path.breakpoints.append(Breakpoint(
            r["lambda"], dense(r["beta"], 0.0), tuple(i - 1 for i in r["active"]),
            dense(r["weights"], 1.0), _event(r["event_kind"], r["event_var"], r["lambda"])))
    return path


def read_path(file) -> HomotopyPath:
    text = Path(file).read_text()
    return path_from_json(text) if text.lstrip().startswith("{") else path_from_csv(text)
