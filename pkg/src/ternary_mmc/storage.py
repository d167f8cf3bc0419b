"""Snapshot files and the diagnostics / convergence CSV formats.

Snapshot layout (little-endian)::

    magic      8 bytes   b"MMCSNAP\\0"
    version    uint32    1
    n          uint32
    length     float64
    time       float64
    step       int64
    crc_phi1   uint32    zlib.crc32 of the phi1 payload bytes
    crc_phi2   uint32
    payload    phi1 then phi2, n*n float64 each, row-major
"""

from __future__ import annotations

import csv
import math
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .energy import PhasePair

MAGIC = b"MMCSNAP\x00"
VERSION = 1
_HEADER = struct.Struct("<8sIIddqII")

DIAG_COLUMNS = ("step", "time", "energy_gh", "energy_E", "energy_F", "mass1", "mass2",
                "min1", "max1", "min2", "max2", "min_comp", "gibbs_margin",
                "solver_iters", "solver_grad_norm")

CONVERGENCE_COLUMNS = ("pair", "err_l2_phi1", "rate_l2_phi1", "err_l2_phi2", "rate_l2_phi2",
                       "err_linf_phi1", "rate_linf_phi1", "err_linf_phi2", "rate_linf_phi2")


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    n: int
    length: float
    time: float
    step: int
    pair: PhasePair


def _atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def store_snapshot(path, pair: PhasePair, length: float, time: float, step: int) -> None:
    """Write a snapshot via a temporary file and an atomic rename."""
    a = np.ascontiguousarray(pair.phi1, dtype="<f8")
    b = np.ascontiguousarray(pair.phi2, dtype="<f8")
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise SnapshotError(f"phase arrays must be equal square grids, got {a.shape} and {b.shape}")
    pa, pb = a.tobytes(), b.tobytes()
    header = _HEADER.pack(MAGIC, VERSION, a.shape[0], float(length), float(time), int(step),
                          zlib.crc32(pa), zlib.crc32(pb))
    try:
        _atomic_write(Path(path), header + pa + pb)
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def load_snapshot(path) -> Snapshot:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read snapshot {path}: {exc}") from exc
    if len(data) < _HEADER.size:
        raise SnapshotError(f"{path}: truncated header")
    magic, version, n, length, time, step, crc1, crc2 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: not a snapshot file (bad magic {magic!r})")
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    size = n * n * 8
    if len(data) != _HEADER.size + 2 * size:
        raise SnapshotError(f"{path}: payload is {len(data) - _HEADER.size} bytes, expected {2 * size}")
    pa = data[_HEADER.size:_HEADER.size + size]
    pb = data[_HEADER.size + size:]
    if zlib.crc32(pa) != crc1 or zlib.crc32(pb) != crc2:
        raise SnapshotError(f"{path}: checksum mismatch, file is corrupt")
    phi1 = np.frombuffer(pa, dtype="<f8").reshape(n, n).astype(np.float64)
    phi2 = np.frombuffer(pb, dtype="<f8").reshape(n, n).astype(np.float64)
    return Snapshot(n, length, time, step, PhasePair(phi1, phi2))


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def diag_row(rec) -> list[str]:
    return [_fmt(v) for v in (
        rec.step, rec.time, rec.energy_gh, rec.energy_e_mod, rec.energy_f_mod,
        rec.mass1, rec.mass2, rec.min1, rec.max1, rec.min2, rec.max2,
        rec.min_sum_complement, rec.gibbs_margin, rec.solver_iters, rec.solver_grad_norm)]


def append_diag_csv(path, rec) -> None:
    """Append one record, writing the header first if the file is new or empty."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(DIAG_COLUMNS)
            w.writerow(diag_row(rec))
    except OSError as exc:
        raise OSError(f"cannot append diagnostics to {path}: {exc}") from exc


def read_diag_csv(path) -> list[dict]:
    """Parse a diagnostics CSV into dicts of floats (``step``/``solver_iters`` as ints)."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != DIAG_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        out = []
        for row in reader:
            out.append({k: (int(v) if k in ("step", "solver_iters") else float(v))
                        for k, v in row.items()})
        return out


def write_convergence_csv(path, rows) -> None:
    lines = []
    for r in rows:
        lines.append([r.label] + [_fmt(v) for v in (
            r.err_l2_phi1, r.rate_l2_phi1, r.err_l2_phi2, r.rate_l2_phi2,
            r.err_linf_phi1, r.rate_linf_phi1, r.err_linf_phi2, r.rate_linf_phi2)])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONVERGENCE_COLUMNS)
        w.writerows(lines)


def read_convergence_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [{k: (v if k == "pair" else float(v)) for k, v in row.items()}
                for row in csv.DictReader(fh)]


def isclose_record(row: dict, rec) -> bool:
    """Whether a parsed CSV row reproduces a record exactly."""
    expected = dict(zip(DIAG_COLUMNS, (float(x) for x in diag_row(rec))))
    for k, v in expected.items():
        got = float(row[k])
        if not (got == v or (math.isnan(got) and math.isnan(v))):
            return False
    return True
