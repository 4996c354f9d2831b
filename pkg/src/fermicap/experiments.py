"""Experiment drivers: assemble a problem from a config and run it.

Each driver writes into an output directory: the observables report, the
snapshot files, a JSON run summary with aggregate diagnostics, and a
manifest echoing the exact configuration text.  Outputs are deterministic
for a fixed config on one platform.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from . import observables as obs
from .caps import cap_on_grid
from .config import (ExperimentConfig, grid_from_config, parse_config,
                     serialize_config)
from .dynamics import (PropagatorContext, Schedule, imaginary_time_ground_state,
                       one_body_modes, run_simulation)
from .grid import Grid, make_grid
from .output import (read_json, read_snapshot, snapshot_path, write_json,
                     write_manifest, write_observables_csv, write_snapshot)
from .potentials import interaction_matrix, potential_on_grid
from .state import (SystemState, TwoBodyState, build_product_state,
                    gaussian_packet, initial_system_state, spin_labels,
                    two_body_norm_sq)


def build_operators(cfg: ExperimentConfig, grid: Grid):
    """Static potential vector, interaction matrix (or None), absorber."""
    v = potential_on_grid(cfg.potential, grid)
    u = interaction_matrix(cfg.interaction, grid) if cfg.interaction.lam else None
    gamma = cap_on_grid(cfg.cap, grid)
    return v, u, gamma


def _orbital_vector(spec, grid: Grid, v_static: np.ndarray) -> np.ndarray:
    if spec.kind == "gaussian":
        return gaussian_packet(grid, spec.x_c, spec.k0, spec.width)
    n_need = max(spec.modes) + 1
    _, modes = one_body_modes(grid, v_static, n_need)
    coeffs = np.ones(len(spec.modes), dtype=complex)
    coeffs[-1] = np.exp(1j * spec.phase)
    coeffs /= np.sqrt(len(spec.modes))
    vec = modes[:, list(spec.modes)] @ coeffs
    nrm = np.sqrt(grid.h * np.sum(np.abs(vec) ** 2))
    return vec / nrm


def build_initial_state(cfg: ExperimentConfig, grid: Grid, v_static: np.ndarray,
                        u_matrix: np.ndarray | None) -> tuple[SystemState, dict]:
    """Initial hierarchy state plus a dict of construction diagnostics."""
    sign = cfg.initial.exchange_sign
    info: dict = {"exchange_sign": sign}
    if cfg.initial.kind == "ground_state":
        prop = cfg.propagation
        psi, energy = imaginary_time_ground_state(
            grid, v_static, u_matrix, sign, dt_imag=prop.itp_dt,
            tol=prop.itp_tol, max_iter=prop.itp_max_iter)
        sector, spinor = spin_labels(sign, cfg.initial.m_s)
        psi2 = TwoBodyState(psi, sign, sector)
        info["ground_state_energy"] = energy
    else:
        a = _orbital_vector(cfg.initial.a, grid, v_static)
        b = _orbital_vector(cfg.initial.b, grid, v_static)
        psi2 = build_product_state(a, b, sign, grid, m_s=cfg.initial.m_s)
        info["orbital_overlap"] = abs(grid.h * np.vdot(a, b))
    state = initial_system_state(psi2, grid, m_s=cfg.initial.m_s)
    return state, info


def make_schedule(cfg: ExperimentConfig, t_end: float | None = None) -> Schedule:
    out = cfg.output
    dt = cfg.propagation.dt
    every = max(1, int(round(out.output_dt / dt)))
    return Schedule(t_end=t_end if t_end is not None else cfg.propagation.t_end,
                    output_every=every,
                    snapshot_every=out.snapshot_every,
                    snapshot_matrices=out.snapshot_matrices,
                    eigen_check=out.eigen_check,
                    hard_bound=out.hard_bound)


def _plan(cfg: ExperimentConfig, grid: Grid, schedule: Schedule) -> dict:
    n_steps = int(round(schedule.t_end / cfg.propagation.dt))
    n_rows = n_steps // schedule.output_every + 1
    n = grid.n_points
    return {
        "n_points": n,
        "h": grid.h,
        "dt": cfg.propagation.dt,
        "t_end": schedule.t_end,
        "n_steps": n_steps,
        "n_rows": n_rows,
        "snapshots": 0 if schedule.snapshot_every == 0
                     else n_rows // schedule.snapshot_every + 1,
        "working_set_mb": round(16.0 * 8.0 * n * n / 1e6, 1),
    }


def _aggregate_checks(checks: list[dict]) -> dict:
    drifts = [c["trace_drift"] for c in checks]
    agg = {
        "max_abs_trace_drift": float(np.max(np.abs(drifts))),
        "max_exchange_defect": float(np.max([c["exchange_defect"] for c in checks])),
        "max_hermiticity_defect": float(
            np.max([c["hermiticity_defect"] for c in checks])),
    }
    eig_rows = [c for c in checks if "rho1_min_eigenvalue" in c]
    if eig_rows:
        worst = 0.0
        for c in eig_rows:
            tr = c["rho1_trace"]
            if tr > 1e-30 and c["rho1_min_eigenvalue"] < worst * tr:
                worst = c["rho1_min_eigenvalue"] / tr
        agg["rho1_worst_eig_over_trace"] = worst
        agg["eigen_checked_rows"] = len(eig_rows)
    return agg


def _monotonicity(rows) -> dict:
    p2 = np.array([r.p2 for r in rows])
    p0 = np.array([r.p0 for r in rows])
    return {
        "p2_max_increase": float(np.max(np.diff(p2), initial=0.0)),
        "p0_max_decrease": float(-np.min(np.diff(p0), initial=0.0)),
    }


def run_experiment(cfg: ExperimentConfig, out_dir, config_text: str,
                   command: str = "run", dry_run: bool = False,
                   on_row=None) -> dict:
    """Propagate the configured experiment and write all outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = grid_from_config(cfg)
    v, u, gamma = build_operators(cfg, grid)
    schedule = make_schedule(cfg)
    plan = _plan(cfg, grid, schedule)
    if dry_run:
        write_manifest(out_dir, command, config_text, [], extra={"plan": plan})
        return {"plan": plan, "dry_run": True}

    pulse = cfg.pulse.to_spec() if cfg.pulse is not None else None
    t0 = time.perf_counter()
    state, info = build_initial_state(cfg, grid, v, u)
    ctx = PropagatorContext(grid, v, u, gamma, cfg.propagation.dt, pulse=pulse)
    traj = run_simulation(state, ctx, schedule, on_row=on_row)
    runtime = time.perf_counter() - t0

    outputs = ["observables.csv", "run_summary.json"]
    write_observables_csv(out_dir / "observables.csv", traj.rows)
    if traj.snapshots:
        (out_dir / "snapshots").mkdir(exist_ok=True)
        for i, snap in enumerate(traj.snapshots):
            write_snapshot(snapshot_path(out_dir, i), snap, grid)
            outputs.append(f"snapshots/snapshot_{i:04d}.txt")

    final = traj.rows[-1]
    summary = {
        "command": command,
        "runtime_seconds": round(runtime, 3),
        "plan": plan,
        "initial": info,
        "final": dict(zip(obs.CSV_COLUMNS, final.values())),
        "checks": {**_aggregate_checks(traj.checks), **_monotonicity(traj.rows)},
    }
    if (cfg.initial.kind == "slater" and cfg.initial.a.kind == "well_modes"
            and len(cfg.initial.a.modes) == 1):
        alpha = _orbital_vector(cfg.initial.a, grid, v)
        ov = grid.h ** 2 * np.vdot(alpha, traj.final_state.rho1.mat @ alpha).real
        summary["alpha_overlap_final"] = float(ov)
        p1 = final.p1
        summary["alpha_overlap_over_p1"] = float(ov / p1) if p1 > 0 else 0.0
    write_json(out_dir / "run_summary.json", summary)
    write_manifest(out_dir, command, config_text, outputs,
                   extra={"runtime_seconds": summary["runtime_seconds"]})
    return summary


def run_groundstate(cfg: ExperimentConfig, out_dir, config_text: str,
                    dry_run: bool = False) -> dict:
    """Ground-state energies: two-body imaginary time plus one-body modes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = grid_from_config(cfg)
    v, u, _ = build_operators(cfg, grid)
    if dry_run:
        plan = {"n_points": grid.n_points, "itp_dt": cfg.propagation.itp_dt}
        write_manifest(out_dir, "groundstate", config_text, [],
                       extra={"plan": plan})
        return {"plan": plan, "dry_run": True}
    t0 = time.perf_counter()
    sign = cfg.initial.exchange_sign
    psi, e2 = imaginary_time_ground_state(
        grid, v, u, sign, dt_imag=cfg.propagation.itp_dt,
        tol=cfg.propagation.itp_tol, max_iter=cfg.propagation.itp_max_iter)
    e1, _ = one_body_modes(grid, v, 4)
    runtime = time.perf_counter() - t0

    sector, _ = spin_labels(sign, cfg.initial.m_s)
    psi2 = TwoBodyState(psi, sign, sector)
    state = initial_system_state(psi2, grid, m_s=cfg.initial.m_s)
    snap = obs.make_snapshot(state, grid)
    (out_dir / "snapshots").mkdir(exist_ok=True)
    write_snapshot(snapshot_path(out_dir, 0), snap, grid)

    summary = {
        "command": "groundstate",
        "runtime_seconds": round(runtime, 3),
        "two_body_energy": e2,
        "one_body_energies": [float(x) for x in e1],
        "exchange_sign": sign,
    }
    write_json(out_dir / "groundstate_summary.json", summary)
    write_manifest(out_dir, "groundstate", config_text,
                   ["groundstate_summary.json", "snapshots/snapshot_0000.txt"],
                   extra={"runtime_seconds": summary["runtime_seconds"]})
    return summary


def reference_grid(cfg: ExperimentConfig) -> Grid:
    """Enlarged grid sharing spacing and point alignment with the original."""
    enlarge = cfg.reference.enlarge if cfg.reference is not None else 2
    n = cfg.grid.n_points
    n_big = enlarge * n
    h = cfg.grid.x_max / n
    # center the original box, shifted by a whole number of cells
    shift = (n_big - n) // 2
    return make_grid(enlarge * cfg.grid.x_max, n_big,
                     cfg.grid.x_offset - shift * h)


def run_reference(cfg: ExperimentConfig, out_dir, config_text: str,
                  dry_run: bool = False, on_row=None) -> dict:
    """No-absorber two-body propagation on an enlarged box.

    Densities are emitted restricted to the original grid's points, in the
    ordinary snapshot format, one snapshot per output row.  The summary
    records when the wave function first touches the enlarged boundary;
    snapshots after that time no longer represent the open system.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid_small = grid_from_config(cfg)
    big = reference_grid(cfg)
    t_end = cfg.propagation.t_end
    if cfg.reference is not None and cfg.reference.t_end > 0:
        t_end = cfg.reference.t_end

    v, u, _ = build_operators(cfg, big)
    schedule = Schedule(t_end=t_end,
                        output_every=make_schedule(cfg).output_every,
                        snapshot_every=1, snapshot_matrices=False,
                        eigen_check=False, hard_bound=1e-6)
    plan = _plan(cfg, big, schedule)
    if dry_run:
        write_manifest(out_dir, "reference", config_text, [],
                       extra={"plan": plan})
        return {"plan": plan, "dry_run": True}

    t0 = time.perf_counter()
    state, info = build_initial_state(cfg, big, v, u)
    gamma0 = np.zeros(big.n_points)
    ctx = PropagatorContext(big, v, u, gamma0, cfg.propagation.dt,
                            pulse=cfg.pulse.to_spec() if cfg.pulse else None)
    traj = run_simulation(state, ctx, schedule, on_row=on_row)
    runtime = time.perf_counter() - t0

    j0 = int(round((cfg.grid.x_offset - big.x_offset) / big.h))
    sl = slice(j0, j0 + grid_small.n_points)
    edge = np.r_[0:2, big.n_points - 2:big.n_points]
    outputs = ["observables.csv", "reference_summary.json"]
    write_observables_csv(out_dir / "observables.csv", traj.rows)
    (out_dir / "snapshots").mkdir(exist_ok=True)
    first_contact = None
    for i, snap in enumerate(traj.snapshots):
        cut = obs.Snapshot(snap.t, snap.n_two[sl], snap.n_one[sl],
                           snap.n_total[sl])
        write_snapshot(snapshot_path(out_dir, i), cut, grid_small)
        outputs.append(f"snapshots/snapshot_{i:04d}.txt")
        if first_contact is None and float(np.max(snap.n_total[edge])) > 1e-8:
            first_contact = snap.t
    summary = {
        "command": "reference",
        "runtime_seconds": round(runtime, 3),
        "plan": plan,
        "initial": info,
        "enlarged_n_points": big.n_points,
        "boundary_contact_t": first_contact,
        "final_p2": traj.rows[-1].p2,
    }
    if first_contact is not None:
        summary["warning"] = (f"boundary density exceeded 1e-8 at t = "
                              f"{first_contact}; later snapshots invalid")
    write_json(out_dir / "reference_summary.json", summary)
    write_manifest(out_dir, "reference", config_text, outputs,
                   extra={"runtime_seconds": summary["runtime_seconds"]})
    return summary


def compare_to_reference(run_dir, ref_dir, gamma: np.ndarray) -> dict:
    """Interior L-infinity total-density deviation, snapshot by snapshot.

    Only engine snapshot times at or before the reference's boundary
    contact are compared; the interior is where the absorber vanishes.
    """
    run_dir, ref_dir = Path(run_dir), Path(ref_dir)
    summary_path = ref_dir / "reference_summary.json"
    ref_summary = read_json(summary_path) if summary_path.exists() else {}
    contact = ref_summary.get("boundary_contact_t")

    ref_snaps = {}
    for p in sorted((ref_dir / "snapshots").glob("snapshot_*.txt")):
        meta, blocks = read_snapshot(p)
        ref_snaps[round(meta["t"], 9)] = blocks["n_total"]
    interior = gamma == 0.0
    devs = []
    for p in sorted((run_dir / "snapshots").glob("snapshot_*.txt")):
        meta, blocks = read_snapshot(p)
        t = round(meta["t"], 9)
        if contact is not None and t >= contact:
            continue
        if t not in ref_snaps:
            continue
        dev = float(np.max(np.abs(blocks["n_total"][interior]
                                  - ref_snaps[t][interior])))
        devs.append({"t": t, "linf": dev})
    return {
        "boundary_contact_t": contact,
        "n_compared": len(devs),
        "max_linf": max((d["linf"] for d in devs), default=float("nan")),
        "per_snapshot": devs,
    }


def _oracle_problem(m: int, sign: int, seed: int):
    """A smooth random absorber problem on a tiny grid."""
    rng = np.random.default_rng(seed)
    grid = make_grid(4.0, m)
    x = grid.x
    base = 2.0 * np.pi * x / grid.x_max
    v = (rng.normal() * np.cos(base) + rng.normal() * np.sin(base)
         + 0.5 * rng.normal() * np.cos(2 * base))
    u = 0.8 * np.cos(np.subtract.outer(base, base))
    u = u + 0.3 * rng.normal() * np.cos(2.0 * np.subtract.outer(base, base))
    gamma = np.zeros(m)
    edge = max(1, m // 4)
    gamma[:edge] = rng.uniform(0.3, 0.8, size=edge)
    gamma[-edge:] = rng.uniform(0.3, 0.8, size=edge)
    psi = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    psi = psi + sign * psi.T
    psi /= np.sqrt(two_body_norm_sq(psi, grid))
    return grid, v, u, gamma, psi


def run_oracle_suite(out_dir, m_values=(4, 6), seed: int = 1234,
                     n_states: int = 3, t_end: float = 0.6,
                     dt: float = 0.05, verbose_print=None) -> dict:
    """Engine-versus-dense-reference comparison on tiny grids.

    For every grid size and exchange sector, random pure two-body states
    are propagated by the production engine and by fourth-order integration
    of the dense Fock-space generator; blockwise deviations must shrink by
    about a factor of four when the engine step is halved.  Structural
    checks (trace preservation, block flow direction, positivity, matrix
    exponential cross-check) run on the same problems.  Writes
    ``oracle_report.json``; returns the report.
    """
    from . import oracle as orc
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    say = verbose_print if verbose_print is not None else (lambda s: None)
    cases = []
    for m in m_values:
        for sign in (-1, 1):
            for k in range(n_states):
                case_seed = seed + 1000 * m + 100 * (sign + 1) + k
                grid, v, u, gamma, psi = _oracle_problem(m, sign, case_seed)
                dev_c = orc.engine_vs_oracle(grid, v, u, gamma, sign, psi,
                                             t_end, dt)
                dev_f = orc.engine_vs_oracle(grid, v, u, gamma, sign, psi,
                                             t_end, dt / 2)
                ratio = dev_c["max"] / dev_f["max"]
                gen = orc.build_generator(grid, v, u, gamma, sign)
                rho0 = orc.embed_state(
                    initial_system_state(TwoBodyState(psi, sign), grid),
                    gen.basis)
                rho_rk4 = orc.integrate_rk4(gen, rho0, t_end, dt / 20.0)
                rho_exp = orc.integrate_expm(gen, rho0, t_end)
                eig_min = float(np.linalg.eigvalsh(
                    0.5 * (rho_rk4 + rho_rk4.conj().T))[0])
                case = {
                    "m": m,
                    "sign": sign,
                    "state": k,
                    "deviation_coarse": dev_c["max"],
                    "deviation_fine": dev_f["max"],
                    "ratio": ratio,
                    "blocks_coarse": {b: dev_c[b] for b in ("p0", "rho1", "psi2")},
                    "trace_error": abs(dev_c["trace_ref"] - 1.0),
                    "rk4_vs_expm": float(np.max(np.abs(rho_rk4 - rho_exp))),
                    "min_eigenvalue": eig_min,
                    "block_flow_ok": orc.verify_block_flow_direction(gen)["ok"],
                }
                case["pass"] = bool(
                    3.5 <= ratio <= 4.5
                    and case["trace_error"] < 1e-10
                    and case["rk4_vs_expm"] < 1e-8
                    and case["min_eigenvalue"] > -1e-9
                    and case["block_flow_ok"])
                cases.append(case)
                say(f"m={m} sign={sign:+d} state={k}: "
                    f"dev {dev_c['max']:.3e} -> {dev_f['max']:.3e} "
                    f"ratio {ratio:.2f} "
                    f"{'PASS' if case['pass'] else 'FAIL'}")
    report = {
        "command": "oracle",
        "t_end": t_end,
        "dt": dt,
        "seed": seed,
        "cases": cases,
        "all_pass": all(c["pass"] for c in cases),
    }
    write_json(out_dir / "oracle_report.json", report)
    write_manifest(out_dir, "oracle", "", ["oracle_report.json"],
                   extra={"seed": seed})
    return report


def run_from_text(config_text: str, out_dir, command: str = "run",
                  dry_run: bool = False, on_row=None) -> dict:
    cfg = parse_config(config_text)
    if command == "run":
        return run_experiment(cfg, out_dir, config_text, command,
                              dry_run=dry_run, on_row=on_row)
    if command == "groundstate":
        return run_groundstate(cfg, out_dir, config_text, dry_run=dry_run)
    if command == "reference":
        return run_reference(cfg, out_dir, config_text, dry_run=dry_run,
                             on_row=on_row)
    raise ValueError(f"unknown command {command!r}")


def _sweep_entry(args) -> tuple[str, dict]:
    text, out_dir = args
    return out_dir, run_from_text(text, out_dir, "run")


def run_sweep(cfg: ExperimentConfig, out_dir, config_text: str,
              jobs: int = 1, dry_run: bool = False) -> dict:
    """Run the configured one-parameter sweep into per-value directories."""
    if cfg.sweep is None:
        raise ValueError("config has no [sweep] section")
    from .config import apply_overrides
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for value in cfg.sweep.values:
        text = apply_overrides(config_text,
                               [f"{cfg.sweep.key}={_format_sweep_value(value)}"])
        sub = out_dir / f"{cfg.sweep.key.replace('.', '_')}={value:g}"
        entries.append((text, str(sub)))
    if dry_run:
        plan = {"entries": [e[1] for e in entries], "jobs": jobs}
        write_manifest(out_dir, "sweep", config_text, [], extra={"plan": plan})
        return {"plan": plan, "dry_run": True}
    results = {}
    if jobs > 1:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
            for sub, summary in pool.map(_sweep_entry, entries):
                results[sub] = summary["final"]
    else:
        for entry in entries:
            sub, summary = _sweep_entry(entry)
            results[sub] = summary["final"]
    write_json(out_dir / "sweep_summary.json", results)
    write_manifest(out_dir, "sweep", config_text, ["sweep_summary.json"],
                   extra={"jobs": jobs})
    return results


def _format_sweep_value(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))
