"""Figure rendering for finished output directories.

Reads the delimited observables report and the flat-text snapshots written
by the drivers and renders standard matplotlib figures next to them, under
``figures/``.  Purely a consumer of the documented file formats; nothing in
the solvers depends on this module.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .output import read_json, read_observables_csv, read_snapshot


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _load_snapshots(out_dir: Path):
    snaps = []
    snap_dir = out_dir / "snapshots"
    if snap_dir.is_dir():
        for p in sorted(snap_dir.glob("snapshot_*.txt")):
            snaps.append(read_snapshot(p))
    return snaps


def _axis(meta) -> np.ndarray:
    return meta["x_offset"] + meta["h"] * np.arange(int(meta["n_points"]))


def render_observables(out_dir: Path, fig_dir: Path) -> list[Path]:
    plt = _pyplot()
    cols = read_observables_csv(out_dir / "observables.csv")
    t = cols["t"]
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    ax0.plot(t, cols["P2"], label="P(2)")
    ax0.plot(t, cols["P1"], label="P(1)")
    ax0.plot(t, cols["P0"], label="P(0)")
    ax0.plot(t, cols["P2"] + cols["P1"] + cols["P0"], "k--", lw=0.8,
             label="sum")
    ax0.set_ylabel("block population")
    ax0.legend(loc="center right", fontsize=9)
    ax1.plot(t, cols["purity"], label="purity")
    with np.errstate(invalid="ignore"):
        ax1.plot(t, cols["cond_purity_1"], label="cond. purity (n=1)")
    ax1.plot(t, cols["entropy"], label="entropy")
    ax1.plot(t, cols["overlap_initial"], label="overlap with t=0")
    ax1.set_xlabel("t")
    ax1.legend(fontsize=9)
    fig.tight_layout()
    path = fig_dir / "observables.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def render_densities(out_dir: Path, fig_dir: Path) -> list[Path]:
    plt = _pyplot()
    snaps = _load_snapshots(out_dir)
    if not snaps:
        return []
    paths = []
    meta0, blocks0 = snaps[-1]
    x = _axis(meta0)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(x, blocks0["n_total"], label="total")
    ax.plot(x, blocks0["n_two"], label="two-particle block")
    ax.plot(x, blocks0["n_one"], label="one-particle block")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.set_title(f"densities at t = {meta0['t']:g}")
    ax.legend(fontsize=9)
    fig.tight_layout()
    p = fig_dir / "densities_final.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.append(p)

    if len(snaps) >= 3:
        times = [m["t"] for m, _ in snaps]
        mat = np.array([b["n_total"] for _, b in snaps])
        fig, ax = plt.subplots(figsize=(7, 4.5))
        im = ax.imshow(mat.T, origin="lower", aspect="auto",
                       extent=(times[0], times[-1], x[0], x[-1] + meta0["h"]),
                       cmap="magma")
        ax.set_xlabel("t")
        ax.set_ylabel("x")
        fig.colorbar(im, ax=ax, label="total density")
        fig.tight_layout()
        p = fig_dir / "density_map.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        paths.append(p)

    if "abs_psi2" in blocks0 or "abs_rho1" in blocks0:
        names = [n for n in ("abs_psi2", "abs_rho1") if n in blocks0]
        fig, axes = plt.subplots(1, len(names), figsize=(5.2 * len(names), 4.4))
        axes = np.atleast_1d(axes)
        for ax, name in zip(axes, names):
            span = (x[0], x[-1] + meta0["h"])
            im = ax.imshow(blocks0[name], origin="lower", aspect="equal",
                           extent=span + span, cmap="viridis")
            ax.set_title(name)
            fig.colorbar(im, ax=ax, shrink=0.85)
        fig.tight_layout()
        p = fig_dir / "matrices_final.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        paths.append(p)
    return paths


def render_sweep(out_dir: Path, fig_dir: Path) -> list[Path]:
    plt = _pyplot()
    summary = read_json(out_dir / "sweep_summary.json")
    pairs = []
    for key, final in summary.items():
        try:
            value = float(key.rsplit("=", 1)[1])
        except (IndexError, ValueError):
            continue
        pairs.append((value, final))
    if not pairs:
        return []
    pairs.sort()
    vals = [v for v, _ in pairs]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for name in ("P2", "P1", "P0"):
        ax.plot(vals, [f[name] for _, f in pairs], "o-", label=name)
    ax.set_xlabel("swept value")
    ax.set_ylabel("final population")
    ax.legend()
    fig.tight_layout()
    path = fig_dir / "sweep.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def render_report(out_dir) -> list[Path]:
    """Render every figure the directory's contents support."""
    out_dir = Path(out_dir)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    if (out_dir / "observables.csv").exists():
        paths += render_observables(out_dir, fig_dir)
    paths += render_densities(out_dir, fig_dir)
    if (out_dir / "sweep_summary.json").exists():
        paths += render_sweep(out_dir, fig_dir)
    return paths
