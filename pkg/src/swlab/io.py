"""Field snapshots, trajectory directories and deterministic JSON-lines output.

Snapshot layout (all little-endian)::

    offset  size     content
    0       8        magic b"SWFIELD\\0"
    8       4        uint32 format version (1)
    12      4        uint32 component count (1 scalar, 2 vector)
    16      4        uint32 n_points
    20      4        uint32 reserved (0)
    24      8        float64 period L
    32      8 c      float64 mean of each component
    ...     16 c n^2 complex128 coefficients of each component, row-major FFT order

Trajectory directory::

    header.json         schema, grid, partition, nu, dt, times, components
    blocks_<name>.csv   t, then one column per block k
    fields/<i>_<name>.swf  optional snapshots (every sample when present)

A JSON-lines record is ``{"body": ..., "envelope": {...}}``: the body is a
pure function of the inputs, the envelope carries wall-clock metadata.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import struct
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np

from .besov import Trajectory
from .spectral import DyadicPartition, Grid2D, SpectralField2D, VectorField2D, make_partition

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "SnapshotError",
    "write_snapshot",
    "read_snapshot",
    "snapshot_bytes",
    "snapshot_from_bytes",
    "save_trajectory",
    "load_trajectory",
    "sanitize",
    "body_line",
    "JsonlWriter",
    "read_jsonl",
    "write_csv",
]

MAGIC = b"SWFIELD\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIII d")
TRAJECTORY_SCHEMA = "swlab.trajectory/1"


class SnapshotError(ValueError):
    """A snapshot or trajectory file is unreadable or malformed."""


# --------------------------------------------------------------------------
# Snapshots
# --------------------------------------------------------------------------


def snapshot_bytes(f: SpectralField2D | VectorField2D) -> bytes:
    comps = f.components if isinstance(f, VectorField2D) else (f,)
    g = comps[0].grid
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, len(comps), g.n_points, 0, float(g.period))
    means = struct.pack(f"<{len(comps)}d", *(float(c.mean) for c in comps))
    body = b"".join(np.ascontiguousarray(c.coefficients, dtype="<c16").tobytes() for c in comps)
    return head + means + body


def snapshot_from_bytes(data: bytes) -> SpectralField2D | VectorField2D:
    if len(data) < _HEADER.size:
        raise SnapshotError("snapshot shorter than its header")
    magic, version, ncomp, n, _, period = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotError("not a field snapshot (bad magic)")
    if version != FORMAT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if ncomp not in (1, 2):
        raise SnapshotError(f"invalid component count {ncomp}")
    expected = _HEADER.size + 8 * ncomp + 16 * ncomp * n * n
    if len(data) != expected:
        raise SnapshotError(f"snapshot has {len(data)} bytes, expected {expected}")
    try:
        grid = Grid2D(n, period)
    except ValueError as exc:
        raise SnapshotError(str(exc)) from exc
    means = struct.unpack_from(f"<{ncomp}d", data, _HEADER.size)
    off = _HEADER.size + 8 * ncomp
    comps = []
    for j in range(ncomp):
        c = np.frombuffer(data, dtype="<c16", count=n * n, offset=off + 16 * j * n * n).reshape(n, n)
        comps.append(SpectralField2D(grid, c.astype(complex), float(means[j])))
    return comps[0] if ncomp == 1 else VectorField2D(*comps)


def write_snapshot(path: str | Path, f: SpectralField2D | VectorField2D) -> Path:
    path = Path(path)
    path.write_bytes(snapshot_bytes(f))
    return path


def read_snapshot(path: str | Path) -> SpectralField2D | VectorField2D:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read {path}: {exc}") from exc
    return snapshot_from_bytes(data)


# --------------------------------------------------------------------------
# Trajectories
# --------------------------------------------------------------------------


def save_trajectory(traj: Trajectory, directory: str | Path, nu: float | None = None,
                    dt: float | None = None, snapshots: bool = True) -> Path:
    """Write ``traj`` as a trajectory directory (see the module docstring)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    p = traj.partition
    ks = list(p.block_indices)
    header = {
        "schema": TRAJECTORY_SCHEMA,
        "grid": {"n_points": p.grid.n_points, "period": p.grid.period},
        "partition": {"k_min": p.k_min, "k_max": p.k_max},
        "nu": nu,
        "dt": dt,
        "times": [float(t) for t in traj.times],
        "components": traj.components,
        "snapshots": bool(snapshots and traj.fields is not None),
    }
    (d / "header.json").write_text(json.dumps(header, sort_keys=True, indent=1) + "\n")
    for name in traj.components:
        rows = [[repr(float(t))] + [repr(float(x)) for x in row] for t, row in zip(traj.times, traj.blocks(name))]
        write_csv(d / f"blocks_{name}.csv", ["t"] + [f"k={k}" for k in ks], rows)
    if header["snapshots"]:
        fd = d / "fields"
        fd.mkdir(exist_ok=True)
        for name, series in traj.fields.items():
            for i, f in enumerate(series):
                write_snapshot(fd / f"{i:05d}_{name}.swf", f)
    return d


def load_trajectory(directory: str | Path) -> Trajectory:
    d = Path(directory)
    try:
        header = json.loads((d / "header.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"cannot read trajectory header in {d}: {exc}") from exc
    if header.get("schema") != TRAJECTORY_SCHEMA:
        raise SnapshotError(f"unsupported trajectory schema {header.get('schema')!r}")
    g = header["grid"]
    part = make_partition(Grid2D(g["n_points"], g["period"]), header["partition"]["k_min"],
                          header["partition"]["k_max"])
    times = header["times"]
    meta = {"nu": header.get("nu"), "dt": header.get("dt")}
    if header.get("snapshots"):
        series = {name: [read_snapshot(d / "fields" / f"{i:05d}_{name}.swf") for i in range(len(times))]
                  for name in header["components"]}
        return Trajectory.from_series(part, times, series, meta=meta)
    tables = {}
    for name in header["components"]:
        with open(d / f"blocks_{name}.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        tables[name] = np.array([[float(x) for x in r[1:]] for r in rows])
    return Trajectory.from_blocks(part, times, tables, meta=meta)


# --------------------------------------------------------------------------
# JSON lines and CSV
# --------------------------------------------------------------------------


def sanitize(obj):
    """JSON-safe copy: non-finite floats become strings, arrays become lists."""
    if isinstance(obj, Mapping):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def body_line(body: Mapping) -> str:
    """Canonical serialization of a record body."""
    return json.dumps(sanitize(body), sort_keys=True, separators=(",", ":"), allow_nan=False)


class JsonlWriter:
    """Ordered sink of ``{"body", "envelope"}`` records."""

    def __init__(self, stream: IO[str], command: str = ""):
        self.stream = stream
        self.command = command
        self.count = 0

    def write(self, body: Mapping):
        env = {"command": self.command, "seq": self.count,
               "written_at": _dt.datetime.now(_dt.timezone.utc).isoformat()}
        self.stream.write('{"body":' + body_line(body) + ',"envelope":'
                          + json.dumps(env, sort_keys=True, separators=(",", ":")) + "}\n")
        self.count += 1

    def write_all(self, bodies: Iterable[Mapping]):
        for b in bodies:
            self.write(b)


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path: str | Path, header: list[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path
