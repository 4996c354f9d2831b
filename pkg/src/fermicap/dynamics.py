"""Propagators for the three-block hierarchy.

The two-particle block evolves under the effective Hamiltonian
H2 - i*Gamma2 with a Strang split step: half-step phases for the local part
(potential, interaction, driving field, absorber), a full spectral kinetic
step in between.  Field factors use the field at the step midpoint.

The one-particle block obeys

    d(rho1)/dt = -(i/hbar) (H_eff rho1 - rho1 H_eff^dag) + (2/hbar) S(t)

with the feeding matrix S built from the two-particle amplitude inside the
absorber.  By the variation-of-constants formula the exact step is
A rho1 A^dag plus the propagated source integral; one step applies the
trapezoidal rule to that integral, transporting its left endpoint with the
same split propagator A:

    rho1 <- A (rho1 + (dt/hbar) S(t)) A^dag + (dt/hbar) S(t + dt).

Expanding A about t shows this agrees with the Taylor form
(2 dt/hbar) S + (dt^2/hbar) dS/dt - i (dt/hbar)^2 (H_eff S - S H_eff^dag)
through second order, so the global error stays O(dt^2); unlike that form
it is a sum of congruences of positive matrices, so rho1 remains positive
semidefinite at every step and the absorbed flux is nonnegative exactly.
The zero-particle weight integrates the absorption rate out of rho1 with
the trapezoidal rule, matching the second order of the block updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as spfft

from . import observables as obs
from .grid import Grid, kinetic_matrix
from .potentials import PulseSpec, eval_pulse
from .state import (OneBodyDensity, SystemState, TwoBodyState,
                    enforce_invariants, source_matrix, two_body_norm_sq)


@dataclass
class PropagatorContext:
    """Grid, operators and cached phase factors for a fixed step size."""

    grid: Grid
    v_static: np.ndarray
    u_matrix: np.ndarray | None
    gamma: np.ndarray
    dt: float
    pulse: PulseSpec | None = None
    hbar: float = 1.0
    mass: float = 1.0

    # caches, filled in __post_init__
    t_k: np.ndarray = field(init=False, repr=False)
    kin_full_1: np.ndarray = field(init=False, repr=False)
    kin_full_2: np.ndarray = field(init=False, repr=False)
    d_half_1: np.ndarray = field(init=False, repr=False)
    d_half_2: np.ndarray = field(init=False, repr=False)
    pot_2: np.ndarray = field(init=False, repr=False)
    gamma_2: np.ndarray = field(init=False, repr=False)
    nz: np.ndarray = field(init=False, repr=False)
    kin_pair_1: np.ndarray = field(init=False, repr=False)
    d_pair_1: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.grid.n_points
        for name, arr in (("v_static", self.v_static), ("gamma", self.gamma)):
            if np.shape(arr) != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        if self.u_matrix is not None and self.u_matrix.shape != (n, n):
            raise ValueError(f"u_matrix must have shape ({n}, {n})")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        hb, dt = self.hbar, self.dt
        self.t_k = (hb * self.grid.k) ** 2 / (2.0 * self.mass)
        self.kin_full_1 = np.exp(-1j * self.t_k * dt / hb)
        self.kin_full_2 = np.multiply.outer(self.kin_full_1, self.kin_full_1)
        self.d_half_1 = np.exp(-1j * (self.v_static - 1j * self.gamma) * dt / (2 * hb))
        self.pot_2 = self.v_static[:, None] + self.v_static[None, :]
        if self.u_matrix is not None:
            self.pot_2 = self.pot_2 + self.u_matrix
        self.gamma_2 = self.gamma[:, None] + self.gamma[None, :]
        self.d_half_2 = np.exp(-1j * (self.pot_2 - 1j * self.gamma_2) * dt / (2 * hb))
        self.nz = np.flatnonzero(self.gamma)
        # two-sided factors M (.) M^dag for the density step, left and right
        # fused into single pointwise products
        self.kin_pair_1 = np.multiply.outer(self.kin_full_1,
                                            self.kin_full_1.conj())
        self.d_pair_1 = np.multiply.outer(self.d_half_1, self.d_half_1.conj())

    def field_at(self, t: float) -> float:
        return eval_pulse(self.pulse, t)

    def _field_half_phase(self, e_field: float) -> np.ndarray | None:
        if e_field == 0.0:
            return None
        return np.exp(-1j * self.grid.x * (e_field * self.dt / (2.0 * self.hbar)))


def step_psi2(psi: np.ndarray, ctx: PropagatorContext, t: float) -> np.ndarray:
    """One split step of the two-particle amplitude from t to t + dt."""
    f = ctx._field_half_phase(ctx.field_at(t + 0.5 * ctx.dt))
    m = psi * ctx.d_half_2
    if f is not None:
        m *= f[:, None]
        m *= f[None, :]
    m = spfft.fft(m, axis=1, overwrite_x=True)
    m = spfft.fft(m, axis=0, overwrite_x=True)
    m *= ctx.kin_full_2
    m = spfft.ifft(m, axis=0, overwrite_x=True)
    m = spfft.ifft(m, axis=1, overwrite_x=True)
    m *= ctx.d_half_2
    if f is not None:
        m *= f[:, None]
        m *= f[None, :]
    return m


def psi2_deriv(psi: np.ndarray, ctx: PropagatorContext, t: float,
               rows: np.ndarray | None = None) -> np.ndarray:
    """d(psi)/dt = -(i/hbar) (H2 - i Gamma2) psi, by operator application.

    With ``rows`` given, only those rows of the derivative are returned
    (the column-direction kinetic term still requires a full transform).
    """
    e = ctx.field_at(t)
    kin0 = np.fft.ifft(ctx.t_k[:, None] * np.fft.fft(psi, axis=0), axis=0)
    if rows is None:
        hp = kin0
        hp += np.fft.ifft(ctx.t_k[None, :] * np.fft.fft(psi, axis=1), axis=1)
        loc = (ctx.pot_2 - 1j * ctx.gamma_2) * psi
        if e != 0.0:
            loc += (e * (ctx.grid.x[:, None] + ctx.grid.x[None, :])) * psi
        hp += loc
    else:
        pr = psi[rows, :]
        hp = kin0[rows, :]
        hp += np.fft.ifft(ctx.t_k[None, :] * np.fft.fft(pr, axis=1), axis=1)
        loc = (ctx.pot_2[rows, :] - 1j * ctx.gamma_2[rows, :]) * pr
        if e != 0.0:
            loc += (e * (ctx.grid.x[rows, None] + ctx.grid.x[None, :])) * pr
        hp += loc
    return (-1j / ctx.hbar) * hp


def _contract_two_sided(m: np.ndarray, ctx: PropagatorContext,
                        f: np.ndarray | None) -> np.ndarray:
    """A m A^dag with the split one-body propagator A on both sides.

    Left factors act on axis 0 and right factors on axis 1, so the two
    chains commute and interleave into four one-dimensional transform
    passes around one fused two-sided kinetic phase.  The input is left
    untouched.
    """
    if f is None:
        dd = ctx.d_pair_1
    else:
        d = ctx.d_half_1 * f
        dd = np.multiply.outer(d, d.conj())
    z = dd * m
    z = spfft.fft(z, axis=0, overwrite_x=True)
    z = spfft.ifft(z, axis=1, overwrite_x=True)
    z *= ctx.kin_pair_1
    z = spfft.ifft(z, axis=0, overwrite_x=True)
    z = spfft.fft(z, axis=1, overwrite_x=True)
    z *= dd
    return z


def source_weight(psi: np.ndarray, ctx: PropagatorContext) -> float:
    """Instantaneous probability flux out of the two-particle block.

    Equals -(hbar/2) d P(2)/dt, half the trace rate feeding rho1; cheap to
    evaluate, used to detect dormant source terms.
    """
    if ctx.nz.size == 0:
        return 0.0
    row_weight = np.sum(np.abs(psi[ctx.nz, :]) ** 2, axis=1)
    return float(2.0 * ctx.grid.h ** 2 / ctx.hbar
                 * (ctx.gamma[ctx.nz] @ row_weight))


def step_rho1(rho: np.ndarray, ctx: PropagatorContext, t: float,
              s_start: np.ndarray | None = None,
              s_end: np.ndarray | None = None) -> np.ndarray:
    """One step of the one-particle block from t to t + dt.

    ``s_start`` and ``s_end`` are the feeding matrices built from the
    two-particle amplitude at the step endpoints (omit them when the source
    is dormant).  The update transports the start-of-step source together
    with the density and adds the end-of-step source untransported, the
    trapezoidal rule for the propagated source integral.
    """
    c = ctx.dt / ctx.hbar
    f = ctx._field_half_phase(ctx.field_at(t + 0.5 * ctx.dt))
    x = rho if s_start is None else rho + c * s_start
    new = _contract_two_sided(x, ctx, f)
    if s_end is not None:
        new += c * s_end
    return new


def absorption_rate(rho: np.ndarray, gamma: np.ndarray, grid: Grid,
                    hbar: float = 1.0) -> float:
    """Probability flux from the one- into the zero-particle block."""
    return (2.0 / hbar) * grid.h * float(np.sum(gamma * np.diag(rho).real))


def step_p0(p0: float, rho_start: np.ndarray, rho_end: np.ndarray,
            gamma: np.ndarray, grid: Grid, dt: float,
            hbar: float = 1.0) -> float:
    """Trapezoidal accumulation of the absorbed one-particle flux."""
    f0 = absorption_rate(rho_start, gamma, grid, hbar)
    f1 = absorption_rate(rho_end, gamma, grid, hbar)
    return p0 + 0.5 * dt * (f0 + f1)


@dataclass(frozen=True)
class Schedule:
    """Run length and output cadence for :func:`run_simulation`.

    ``output_every`` counts propagation steps between observable rows;
    ``snapshot_every`` counts output rows between density snapshots (0
    disables snapshots; the initial and final instants are always included
    when enabled).
    """

    t_end: float
    output_every: int = 50
    snapshot_every: int = 0
    snapshot_matrices: bool = False
    eigen_check: bool = False
    hard_bound: float = 1e-4


@dataclass
class Trajectory:
    rows: list
    snapshots: list
    checks: list
    final_state: SystemState


def run_simulation(initial: SystemState, ctx: PropagatorContext,
                   schedule: Schedule, on_row=None) -> Trajectory:
    """Propagate the hierarchy and collect observables.

    Invariants (exchange symmetry, Hermiticity, unit total trace) are
    enforced at every output row; eigenvalue positivity of rho1 is checked
    at snapshot rows when ``schedule.eigen_check`` is set.  ``on_row`` is an
    optional callback receiving each :class:`~fermicap.observables.ObservableRow`.
    """
    grid = ctx.grid
    n_steps = int(round(schedule.t_end / ctx.dt))
    if n_steps < 1:
        raise ValueError("t_end shorter than one step")
    lossless = ctx.nz.size == 0
    psi_0 = initial.psi2.psi.copy()

    state = initial
    rows: list = []
    snaps: list = []
    checks: list = []

    def emit(st: SystemState, row_index: int, last: bool) -> SystemState:
        want_snap = schedule.snapshot_every > 0 and (
            row_index % schedule.snapshot_every == 0 or last)
        st, diag = enforce_invariants(
            st, grid, hard_bound=schedule.hard_bound,
            check_eigenvalues=want_snap and schedule.eigen_check)
        row = obs.make_row(st, grid, psi_0, diag["trace_drift"])
        rows.append(row)
        diag["t"] = st.t
        checks.append(diag)
        if want_snap:
            snaps.append(obs.make_snapshot(st, grid, schedule.snapshot_matrices))
        if on_row is not None:
            on_row(row)
        return st

    # dormancy thresholds: flux and norms this small cannot move any
    # population by more than ~1e-12 over a full run, far below the
    # conservation tolerances, so the corresponding updates are skipped
    flux_eps = 1e-16
    psi_eps = 1e-18
    rho_dormant = not np.any(initial.rho1.mat)
    s_cache: np.ndarray | None = None
    # the discrete flow never increases the two-particle norm, so the
    # liveness flag only needs refreshing when a row is emitted
    psi_alive = two_body_norm_sq(initial.psi2.psi, grid) > psi_eps

    state = emit(state, 0, last=False)
    for i in range(n_steps):
        t = i * ctx.dt
        psi = state.psi2.psi
        psi_new = step_psi2(psi, ctx, t) if psi_alive else psi
        if lossless:
            rho_new = state.rho1.mat
            p0_new = state.p0
        else:
            flux = source_weight(psi, ctx) if psi_alive else 0.0
            feeding = flux > flux_eps
            if rho_dormant and not feeding:
                rho_new = state.rho1.mat
                p0_new = state.p0
            else:
                rho_dormant = False
                if feeding:
                    s_start = s_cache if s_cache is not None \
                        else source_matrix(psi, ctx.gamma, grid)
                    s_end = source_matrix(psi_new, ctx.gamma, grid)
                else:
                    s_start = s_end = None
                rho_new = step_rho1(state.rho1.mat, ctx, t,
                                    s_start=s_start, s_end=s_end)
                s_cache = s_end
                p0_new = step_p0(state.p0, state.rho1.mat, rho_new, ctx.gamma,
                                 grid, ctx.dt, ctx.hbar)
        state = SystemState(replace(state.psi2, psi=psi_new),
                            replace(state.rho1, mat=rho_new),
                            p0_new, (i + 1) * ctx.dt)
        done = i + 1 == n_steps
        if (i + 1) % schedule.output_every == 0 or done:
            state = emit(state, len(rows), last=done)
            # invariant repair may nudge psi2, so the cached end-of-step
            # source no longer matches it exactly
            s_cache = None
            psi_alive = psi_alive and rows[-1].p2 > psi_eps
    return Trajectory(rows, snaps, checks, state)


def imaginary_time_ground_state(grid: Grid, v_static: np.ndarray,
                                u_matrix: np.ndarray | None, sign: int,
                                dt_imag: float = 0.02, tol: float = 1e-12,
                                max_iter: int = 200_000,
                                hbar: float = 1.0, mass: float = 1.0,
                                ) -> tuple[np.ndarray, float]:
    """Two-particle ground state of the exchange sector by imaginary time.

    Split diffusion steps with per-step renormalization; convergence is
    detected on the per-step energy estimate -log(norm)/dt.  The returned
    energy is the Rayleigh quotient of the converged state, which is
    variational and therefore insensitive to the O(dt^2) bias of the state
    itself.
    """
    n = grid.n_points
    t_k = (hbar * grid.k) ** 2 / (2.0 * mass)
    pot2 = v_static[:, None] + v_static[None, :]
    if u_matrix is not None:
        pot2 = pot2 + u_matrix
    d_half = np.exp(-pot2 * dt_imag / (2.0 * hbar))
    kin = np.exp(-np.add.outer(t_k, t_k) * dt_imag / hbar)

    # smooth nodeless / single-node seed pair localized at the potential min
    j0 = int(np.argmin(v_static))
    x0 = grid.x[j0]
    w = max(4.0 * grid.h, 0.05 * grid.x_max)
    g0 = np.exp(-((grid.x - x0) ** 2) / (2.0 * w ** 2))
    g1 = (grid.x - x0) * g0
    psi = np.outer(g0, g1) + sign * np.outer(g1, g0) if sign == -1 \
        else np.outer(g0, g0)
    psi = psi.astype(complex)
    psi *= 1.0 / np.sqrt(two_body_norm_sq(psi, grid))

    e_prev = np.inf
    for it in range(max_iter):
        psi = d_half * psi
        psi = np.fft.ifft2(kin * np.fft.fft2(psi))
        psi *= d_half
        nrm = np.sqrt(two_body_norm_sq(psi, grid))
        psi /= nrm
        if it % 50 == 0:
            psi = 0.5 * (psi + sign * psi.T)
        e_est = -np.log(nrm) * hbar / dt_imag
        if abs(e_est - e_prev) < tol * max(1.0, abs(e_est)) and it > 10:
            break
        e_prev = e_est
    psi = 0.5 * (psi + sign * psi.T)
    psi *= 1.0 / np.sqrt(two_body_norm_sq(psi, grid))

    hpsi = np.fft.ifft(t_k[:, None] * np.fft.fft(psi, axis=0), axis=0)
    hpsi += np.fft.ifft(t_k[None, :] * np.fft.fft(psi, axis=1), axis=1)
    hpsi += pot2 * psi
    energy = grid.h ** 2 * np.vdot(psi, hpsi).real
    return psi, float(energy)


def one_body_modes(grid: Grid, v_static: np.ndarray, n_modes: int,
                   hbar: float = 1.0, mass: float = 1.0,
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Lowest eigenpairs of the dense one-body Hamiltonian on the grid.

    Returns (energies, modes) with modes[:, i] normalized to unit discrete
    norm and a deterministic sign (largest-magnitude component positive).
    """
    h = kinetic_matrix(grid, mass=mass, hbar=hbar) + np.diag(v_static)
    evals, vecs = np.linalg.eigh(h)
    vecs = vecs[:, :n_modes] / np.sqrt(grid.h)
    for i in range(vecs.shape[1]):
        j = int(np.argmax(np.abs(vecs[:, i])))
        phase = vecs[j, i] / abs(vecs[j, i])
        vecs[:, i] = vecs[:, i] / phase
    return evals[:n_modes], vecs
