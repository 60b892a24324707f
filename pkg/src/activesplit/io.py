"""On-disk formats: report CSV, trajectory diagnostics CSV, binary snapshots
and generated plot scripts."""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .grid import GridSpec, RealField

__all__ = [
    "CSV_HEADER",
    "fmt",
    "write_csv",
    "read_csv",
    "write_diagnostics_csv",
    "write_snapshot",
    "read_snapshot",
    "write_plot_script",
]

PathLike = Union[str, Path]

CSV_HEADER = ["dt", "error", "norm", "method", "preset", "fit_rate", "fit_residual", "ref_certificate"]

SNAPSHOT_MAGIC = b"ASPLSNAP"
SNAPSHOT_VERSION = 1
# magic, version, dims, n, time -> 32 bytes
_HEADER = struct.Struct("<8sIIQd")


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any float64."""
    return format(float(x), ".17g")


def write_csv(report, path: PathLike) -> Path:
    path = Path(path)
    lines = [",".join(CSV_HEADER)]
    for dt, err in zip(report.dts, report.errors):
        lines.append(
            ",".join(
                [
                    fmt(dt),
                    fmt(err),
                    fmt(report.norm),
                    report.method,
                    report.preset,
                    fmt(report.fitted_rate),
                    fmt(report.fit_residual),
                    fmt(report.ref_certificate),
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path: PathLike) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for key in ("dt", "error", "norm", "fit_rate", "fit_residual", "ref_certificate"):
            r[key] = float(r[key])
    return rows


def write_diagnostics_csv(traj, path: PathLike) -> Path:
    path = Path(path)
    lines = ["time,mass,l2,h4"]
    for row in zip(traj.times, traj.mass, traj.l2, traj.h4):
        lines.append(",".join(fmt(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_snapshot(field: RealField, time: float, path: PathLike) -> Path:
    path = Path(path)
    grid = field.grid
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, grid.dims, grid.n, float(time))
    data = np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")
    path.write_bytes(header + data)
    return path


def read_snapshot(path: PathLike) -> tuple[RealField, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, dims, n, time = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file (bad magic)")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    grid = GridSpec(int(dims), int(n))
    expected = _HEADER.size + 8 * grid.size
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(grid.shape)
    return RealField(grid, values.astype(np.float64)), time


_PLOT_TEMPLATE = '''"""Log-log convergence plot for {title}.

Generated file; run with: python {script}
"""
import csv

import matplotlib.pyplot as plt

FILES = {files!r}

fig, ax = plt.subplots()
for name in FILES:
    with open(name) as fh:
        rows = [r for r in csv.DictReader(fh) if r["error"] != "nan"]
    dt = [float(r["dt"]) for r in rows]
    err = [float(r["error"]) for r in rows]
    label = "H^%s, rate %.3f" % (rows[0]["norm"], float(rows[0]["fit_rate"]))
    ax.loglog(dt, err, "o-", label=label)
ax.set_xlabel("dt")
ax.set_ylabel("error at final time")
ax.set_title({title!r})
ax.legend()
fig.savefig({png!r}, dpi=150)
'''


def write_plot_script(csv_names: list[str], path: PathLike, title: str) -> Path:
    path = Path(path)
    text = _PLOT_TEMPLATE.format(
        title=title, script=path.name, files=list(csv_names), png=path.with_suffix(".png").name
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
