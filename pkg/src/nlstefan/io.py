"""Snapshot files and CSV tables.

Snapshot layout: one ASCII header line

    NSFIELD v1 dim=<n> counts=<c1,...> lower=<x1,...> h=<h> ext=<e> t=<t>

followed by the values as little-endian float64 in row-major order.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError
from .fronts import FrontTrace
from .grid import Field, Grid

__all__ = [
    "write_snapshot",
    "read_snapshot",
    "export_csv",
    "emit_front_csv",
    "emit_error_table",
    "fmt",
]

MAGIC = "NSFIELD"
VERSION = "v1"


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any float64."""
    return format(float(x), ".17g")


def _join(xs) -> str:
    return ",".join(repr(float(x)) for x in xs)


def write_snapshot(field: Field, path: str | os.PathLike, t: float = 0.0) -> None:
    g = field.grid
    header = (
        f"{MAGIC} {VERSION} dim={g.dim} counts={','.join(str(c) for c in g.counts)} "
        f"lower={_join(g.lower)} h={float(g.h)!r} ext={float(field.exterior)!r} t={float(t)!r}\n"
    )
    data = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data)


def _parse_header(line: str) -> dict[str, str]:
    parts = line.split()
    if len(parts) < 2 or parts[0] != MAGIC:
        raise FormatError("missing NSFIELD magic")
    if parts[1] != VERSION:
        raise FormatError(f"unsupported version {parts[1]!r}")
    out = {}
    for p in parts[2:]:
        key, sep, val = p.partition("=")
        if not sep:
            raise FormatError(f"malformed header token {p!r}")
        out[key] = val
    for key in ("dim", "counts", "lower", "h", "ext", "t"):
        if key not in out:
            raise FormatError(f"header lacks {key}")
    return out


def read_snapshot(path: str | os.PathLike) -> tuple[Field, float]:
    """Return (field, t) from an NSFIELD file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError("no header line")
    try:
        head = _parse_header(raw[:nl].decode("ascii"))
        dim = int(head["dim"])
        counts = tuple(int(c) for c in head["counts"].split(","))
        lower = tuple(float(x) for x in head["lower"].split(","))
        h = float(head["h"])
        ext = float(head["ext"])
        t = float(head["t"])
    except (UnicodeDecodeError, ValueError) as exc:
        raise FormatError(f"bad header: {exc}") from None
    if len(counts) != dim or len(lower) != dim:
        raise FormatError("header dimension does not match counts/lower")
    body = raw[nl + 1:]
    n = int(np.prod(counts))
    if len(body) != 8 * n:
        raise FormatError(f"expected {8 * n} value bytes for counts {counts}, found {len(body)}")
    values = np.frombuffer(body, dtype="<f8").astype(float).reshape(counts)
    upper = tuple(a + c * h for a, c in zip(lower, counts))
    grid = Grid(lower, upper, h, counts)
    return Field(grid, values, ext), t


def export_csv(field: Field, path: str | os.PathLike) -> int:
    """One row per cell: index columns, coordinate columns, value.  Returns the row count."""
    g = field.grid
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    idx = np.indices(g.shape).reshape(g.dim, -1).T
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{k}" for k in range(g.dim)] + [f"x{k}" for k in range(g.dim)] + ["value"])
        flat = field.values.ravel()
        for row, ii in enumerate(idx):
            xs = [g.lower[k] + (ii[k] + 0.5) * g.h for k in range(g.dim)]
            w.writerow([int(i) for i in ii] + [fmt(x) for x in xs] + [fmt(flat[row])])
    return len(idx)


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, float) else x for x in r])


def emit_front_csv(trace: FrontTrace, path: str | os.PathLike) -> None:
    """Columns t, measure, components, radius, one row per recorded step."""
    rows = [(float(t), float(m), int(c), float(r)) for t, m, c, r in trace.rows()]
    _write_rows(path, ["t", "measure", "components", "radius"], rows)


def emit_error_table(rows: Iterable[tuple[float, float, float]], path: str | os.PathLike) -> None:
    """Columns eps, t, l1_error, sorted by eps descending then t."""
    rows = sorted(((float(e), float(t), float(x)) for e, t, x in rows), key=lambda r: (-r[0], r[1]))
    _write_rows(path, ["eps", "t", "l1_error"], rows)
