"""Observables of the number-resolved hierarchy state.

All reductions carry the grid weight h so that discrete traces approximate
their continuum counterparts: P(2) = h^2 sum |psi2|^2, P(1) = h tr rho1,
and the three block weights sum to one while particles are absorbed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .state import SystemState, one_body_trace, two_body_norm_sq

# below this block weight, conditional quantities are considered undefined
CONDITIONAL_THRESHOLD = 1e-12

CSV_COLUMNS = ("t", "P2", "P1", "P0", "N_expect", "purity", "cond_purity_1",
               "entropy", "overlap_initial", "trace_drift")


@dataclass(frozen=True)
class ObservableRow:
    """One output-stride record; mirrors the delimited report columns."""

    t: float
    p2: float
    p1: float
    p0: float
    n_expect: float
    purity: float
    cond_purity_1: float
    entropy: float
    overlap_initial: float
    trace_drift: float

    def values(self) -> tuple[float, ...]:
        return (self.t, self.p2, self.p1, self.p0, self.n_expect, self.purity,
                self.cond_purity_1, self.entropy, self.overlap_initial,
                self.trace_drift)


@dataclass(frozen=True)
class Snapshot:
    """Spatial densities at one instant, optionally with block matrices."""

    t: float
    n_two: np.ndarray
    n_one: np.ndarray
    n_total: np.ndarray
    abs_psi2: np.ndarray | None = None
    abs_rho1: np.ndarray | None = None


def partial_traces(state: SystemState, grid: Grid) -> tuple[float, float, float]:
    """Block weights (P(2), P(1), P(0))."""
    return (two_body_norm_sq(state.psi2.psi, grid),
            one_body_trace(state.rho1.mat, grid),
            state.p0)


def particle_number(state: SystemState, grid: Grid) -> float:
    p2, p1, _ = partial_traces(state, grid)
    return 2.0 * p2 + p1


def purity(state: SystemState, grid: Grid) -> float:
    """tr(rho^2) of the full block-diagonal state."""
    p2, _, p0 = partial_traces(state, grid)
    tr_rho1_sq = grid.h ** 2 * float(np.sum(np.abs(state.rho1.mat) ** 2))
    return p2 ** 2 + tr_rho1_sq + p0 ** 2


def cond_purity(state: SystemState, grid: Grid, n: int) -> float:
    """Purity of the state conditioned on finding n particles.

    The two- and zero-particle blocks are pure by construction, so only
    n = 1 is nontrivial.  Raises ValueError when the conditioning weight
    P(n) is below :data:`CONDITIONAL_THRESHOLD`.
    """
    p2, p1, p0 = partial_traces(state, grid)
    weight = {2: p2, 1: p1, 0: p0}[n]
    if weight < CONDITIONAL_THRESHOLD:
        raise ValueError(f"P({n}) = {weight!r} too small to condition on")
    if n != 1:
        return 1.0
    tr_rho1_sq = grid.h ** 2 * float(np.sum(np.abs(state.rho1.mat) ** 2))
    return tr_rho1_sq / p1 ** 2


def entropy(state: SystemState, grid: Grid) -> float:
    """von Neumann entropy of the block-diagonal state (natural log).

    The pure two-particle block enters through its weight alone; the
    one-particle block through the eigenvalues of h * rho1.  Nonpositive
    eigenvalues (roundoff) contribute nothing.
    """
    p2, _, p0 = partial_traces(state, grid)
    lam = grid.h * np.linalg.eigvalsh(state.rho1.mat)
    weights = np.concatenate(([p2], lam, [p0]))
    pos = weights[weights > 0.0]
    return float(-np.sum(pos * np.log(pos)))


def densities(state: SystemState, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spatial one-particle densities (n_two, n_one, n_total).

    n_two integrates (with weight h) to 2 P(2), n_one to P(1).
    """
    n_two = 2.0 * grid.h * np.sum(np.abs(state.psi2.psi) ** 2, axis=0)
    n_one = np.diag(state.rho1.mat).real.copy()
    return n_two, n_one, n_two + n_one


def overlap_initial(psi_t: np.ndarray, psi_0: np.ndarray, grid: Grid) -> float:
    """Squared overlap |<psi_0|psi_t>|^2 within the two-particle block."""
    return abs(grid.h ** 2 * np.vdot(psi_0, psi_t)) ** 2


def conditional_expectation(state: SystemState, grid: Grid, op: np.ndarray,
                            n: int) -> float:
    """Expectation of a one-body operator in the n-particle sector.

    ``op`` is a dense (n_points, n_points) matrix in the grid basis (use
    np.diag for multiplicative operators).  The result is normalized by
    P(n); conditioning on an (almost) empty sector raises, as does n = 0
    where no particle is left to measure.
    """
    if n == 0:
        raise ValueError("no one-body observable in the zero-particle sector")
    p2, p1, _ = partial_traces(state, grid)
    if n == 2:
        if p2 < CONDITIONAL_THRESHOLD:
            raise ValueError("P(2) too small to condition on")
        psi = state.psi2.psi
        val = 2.0 * grid.h ** 2 * np.vdot(psi, op @ psi).real
        return val / p2
    if n == 1:
        if p1 < CONDITIONAL_THRESHOLD:
            raise ValueError("P(1) too small to condition on")
        val = grid.h * np.trace(op @ state.rho1.mat).real
        return val / p1
    raise ValueError(f"sector must be 0, 1 or 2, got {n}")


def make_row(state: SystemState, grid: Grid, psi_0: np.ndarray,
             trace_drift: float) -> ObservableRow:
    p2, p1, p0 = partial_traces(state, grid)
    tr_rho1_sq = grid.h ** 2 * float(np.sum(np.abs(state.rho1.mat) ** 2))
    cp1 = tr_rho1_sq / p1 ** 2 if p1 >= CONDITIONAL_THRESHOLD else float("nan")
    return ObservableRow(
        t=state.t, p2=p2, p1=p1, p0=p0,
        n_expect=2.0 * p2 + p1,
        purity=p2 ** 2 + tr_rho1_sq + p0 ** 2,
        cond_purity_1=cp1,
        entropy=entropy(state, grid),
        overlap_initial=overlap_initial(state.psi2.psi, psi_0, grid),
        trace_drift=trace_drift,
    )


def make_snapshot(state: SystemState, grid: Grid,
                  with_matrices: bool = False) -> Snapshot:
    n_two, n_one, n_total = densities(state, grid)
    abs_psi2 = np.abs(state.psi2.psi) if with_matrices else None
    abs_rho1 = np.abs(state.rho1.mat) if with_matrices else None
    return Snapshot(state.t, n_two, n_one, n_total, abs_psi2, abs_rho1)
