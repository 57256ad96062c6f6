"""Snapshot persistence and observable-series CSV emission.

Snapshot layout (all little-endian, fixed width)::

    b"NLSS" | u32 version | u32 d | u32 M * d | f64 L * d | f64 t | (f64 re, f64 im) * M**d

Samples are row-major.  Loading validates every header field and the exact
payload length before constructing a field, so a bad file never yields a
partially read result.
"""
from __future__ import annotations

import csv
import hashlib
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError
from .functionals import Observables
from .grid import Field, Grid

MAGIC = b"NLSS"
FORMAT_VERSION = 1
_SAMPLE = np.dtype("<c16")

CSV_COLUMNS = (
    "t", "mass", "energy", "h", "m1", "grad_sq", "linf", "lalpha2", "xnorm_sq",
    "pc_norm", "boundary_frac", "hi_spec_frac", "forward_dist", "pulled_dist",
)
ABORT_MARKER = "ABORT"


def encode_snapshot(f: Field) -> bytes:
    g = f.grid
    head = MAGIC + struct.pack("<II", FORMAT_VERSION, g.d)
    head += struct.pack(f"<{g.d}I", *([g.M] * g.d))
    head += struct.pack(f"<{g.d}d", *([g.L] * g.d))
    head += struct.pack("<d", f.time)
    return head + np.ascontiguousarray(f.values, dtype=_SAMPLE).tobytes()


def decode_snapshot(data: bytes) -> Field:
    def need(offset, n, what):
        if len(data) < offset + n:
            raise FormatError(f"truncated while reading {what}", len(data))

    need(0, 4, "magic")
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}", 0)
    need(4, 8, "version and dimension")
    version, d = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version} (expected {FORMAT_VERSION})", 4)
    if d not in (1, 2):
        raise FormatError(f"unsupported dimension {d}", 8)
    off = 12
    need(off, 4 * d, "axis sizes")
    Ms = struct.unpack_from(f"<{d}I", data, off)
    off += 4 * d
    need(off, 8 * d, "axis lengths")
    Ls = struct.unpack_from(f"<{d}d", data, off)
    off += 8 * d
    need(off, 8, "time")
    (t,) = struct.unpack_from("<d", data, off)
    off += 8
    if len(set(Ms)) != 1 or len(set(Ls)) != 1:
        raise FormatError("anisotropic grids are not supported", 12)
    n = int(np.prod(Ms))
    expected = off + n * _SAMPLE.itemsize
    if len(data) < expected:
        raise FormatError(f"truncated payload: {len(data)} bytes, expected {expected}", len(data))
    if len(data) > expected:
        raise FormatError(f"trailing bytes: {len(data)} bytes, expected {expected}", expected)
    try:
        grid = Grid(Ls[0], Ms[0], d)
    except ValueError as exc:
        raise FormatError(f"invalid grid header: {exc}", 12) from None
    values = np.frombuffer(data, dtype=_SAMPLE, count=n, offset=off).astype(complex).reshape(grid.shape)
    try:
        return Field(grid, values, t)
    except ValueError as exc:
        raise FormatError(f"invalid samples: {exc}", off) from None


def save_snapshot(f: Field, path) -> Path:
    path = Path(path)
    path.write_bytes(encode_snapshot(f))
    return path


def load_snapshot(path) -> Field:
    return decode_snapshot(Path(path).read_bytes())


# -- CSV --------------------------------------------------------------------


def fmt(v) -> str:
    """17 significant digits; round-trips every binary64."""
    if v is None:
        return ""
    return format(float(v), ".17g")


def observable_row(obs: Observables, forward_dist=None, pulled_dist=None) -> list[str]:
    d = obs.as_dict()
    vals = [d[c] for c in CSV_COLUMNS[:-2]]
    return [fmt(v) for v in vals] + [fmt(forward_dist), fmt(pulled_dist)]


class SeriesWriter:
    """Incremental CSV writer: rows are flushed as they are produced."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(CSV_COLUMNS)
        self.rows = 0

    def write(self, obs: Observables, forward_dist=None, pulled_dist=None) -> None:
        self._w.writerow(observable_row(obs, forward_dist, pulled_dist))
        self._fh.flush()
        self.rows += 1

    def abort(self, t: float, reason: str) -> None:
        self._w.writerow([ABORT_MARKER, fmt(t), reason] + [""] * (len(CSV_COLUMNS) - 3))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_series(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_rows(path, rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def source_hash() -> str:
    """SHA-256 over the package sources, for run manifests."""
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()
