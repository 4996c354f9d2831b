"""Delimited reports, density snapshots and the run manifest.

Observables go to a comma-separated file with a fixed header; every number
is written with 17 significant digits so that rereading reproduces the
binary values.  Snapshots are flat text, one value per line, grouped into
named blocks behind ``#`` header lines.  Each output directory carries a
manifest recording the exact configuration and library versions.
"""

from __future__ import annotations

import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import matplotlib
import numpy as np
import scipy

from .grid import Grid
from .observables import CSV_COLUMNS, ObservableRow, Snapshot


def fmt(value: float) -> str:
    return f"{value:.17g}"


def write_observables_csv(path, rows: list[ObservableRow]) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row.values()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_observables_csv(path) -> dict[str, np.ndarray]:
    """Columns of a written report, keyed by header name."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if header != list(CSV_COLUMNS):
        raise ValueError(f"unexpected columns in {path}: {header}")
    return {name: data[:, i] for i, name in enumerate(header)}


def write_snapshot(path, snap: Snapshot, grid: Grid) -> None:
    blocks: list[tuple[str, np.ndarray]] = [
        ("n_two", snap.n_two), ("n_one", snap.n_one), ("n_total", snap.n_total)]
    if snap.abs_psi2 is not None:
        blocks.append(("abs_psi2", snap.abs_psi2))
    if snap.abs_rho1 is not None:
        blocks.append(("abs_rho1", snap.abs_rho1))
    lines = [
        f"# t = {fmt(snap.t)}",
        f"# n_points = {grid.n_points}",
        f"# h = {fmt(grid.h)}",
        f"# x_offset = {fmt(grid.x_offset)}",
    ]
    for name, arr in blocks:
        arr = np.atleast_2d(arr)
        lines.append(f"# block: {name} {arr.shape[0]} {arr.shape[1]}")
        lines.extend(fmt(v) for v in arr.reshape(-1))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_snapshot(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Header metadata and named blocks of a snapshot file."""
    meta: dict = {}
    blocks: dict[str, np.ndarray] = {}
    name, shape, buf = None, None, []

    def flush():
        if name is not None:
            arr = np.array(buf, dtype=float).reshape(shape)
            blocks[name] = arr[0] if shape[0] == 1 else arr

    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("block:"):
                    flush()
                    parts = body.split()
                    name = parts[1]
                    shape = (int(parts[2]), int(parts[3]))
                    buf = []
                elif "=" in body:
                    key, _, val = body.partition("=")
                    key = key.strip()
                    meta[key] = int(val) if key == "n_points" else float(val)
            else:
                buf.append(float(line))
    flush()
    return meta, blocks


def snapshot_path(out_dir, index: int) -> Path:
    return Path(out_dir) / "snapshots" / f"snapshot_{index:04d}.txt"


def write_manifest(out_dir, command: str, config_text: str,
                   outputs: list[str], extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": config_text,
        "outputs": sorted(outputs),
        "versions": {
            "python": sys.version.split()[0],
            "platform": platform.platform(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
    }
    if extra:
        manifest.update(extra)
    write_json(Path(out_dir) / "manifest.json", manifest)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
