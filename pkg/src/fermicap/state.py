"""State containers for the three-block particle-number hierarchy.

With absorbing boundaries the two-particle problem lives in the direct sum
of the two-, one- and zero-particle sectors.  The two-particle block stays
pure and is stored as a complex matrix psi2[j, k] (coordinates of particle
one along axis 0), (anti)symmetric under exchange according to ``sign``.
The one-particle block is a Hermitian matrix rho1[j, k] normalized so that
``h * trace`` is the one-particle population, and the zero-particle block is
the scalar weight p0.

Discrete scalar products carry the grid weight: <a|b> = h * sum(conj(a)*b)
for vectors and h^2 for two-particle matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import blas

from .grid import Grid


class TraceDriftError(RuntimeError):
    """Total population left the unit trace by more than the hard bound."""


@dataclass(frozen=True)
class TwoBodyState:
    """Pure two-particle spatial wave function with exchange symmetry.

    ``sign`` is +1 for a symmetric orbital part (spin singlet) and -1 for an
    antisymmetric one (spin triplet); ``spin_label`` records the spin sector
    the orbital symmetry belongs to.
    """

    psi: np.ndarray
    sign: int
    spin_label: str = ""

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")


@dataclass(frozen=True)
class OneBodyDensity:
    """Hermitian one-particle density matrix with a spinor tag."""

    mat: np.ndarray
    spinor_label: str = ""


@dataclass(frozen=True)
class SystemState:
    """Full hierarchy state at one instant."""

    psi2: TwoBodyState
    rho1: OneBodyDensity
    p0: float
    t: float = 0.0


def spin_labels(sign: int, m_s: int = 0) -> tuple[str, str]:
    """Spin-sector label and surviving spinor label for an exchange sign.

    A symmetric orbital pairs with the singlet (S=0); an antisymmetric one
    with the triplet (S=1), whose M_S component is passed through.  The
    second label names the spin state the remaining particle keeps after a
    loss, which is pure in all cases.
    """
    if sign == 1:
        return "S=0 M_S=0", "(up - down)/sqrt(2)"
    if m_s == 1:
        return "S=1 M_S=+1", "up"
    if m_s == -1:
        return "S=1 M_S=-1", "down"
    return "S=1 M_S=0", "(up + down)/sqrt(2)"


def inner_1d(a: np.ndarray, b: np.ndarray, grid: Grid) -> complex:
    return grid.h * np.vdot(a, b)


def two_body_norm_sq(psi: np.ndarray, grid: Grid) -> float:
    """P(2) of a two-particle matrix: h^2 * sum |psi|^2."""
    return grid.h ** 2 * float(np.sum(np.abs(psi) ** 2))


def one_body_trace(rho: np.ndarray, grid: Grid) -> float:
    """P(1) of a one-particle density: h * real trace."""
    return grid.h * float(np.trace(rho).real)


def gaussian_packet(grid: Grid, x_c: float, k0: float, width: float) -> np.ndarray:
    """Normalized Gaussian wave packet exp(-(x-x_c)^2/(4 width^2) + i k0 x).

    ``width`` is the position-space standard deviation of |packet|^2.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    x = grid.x
    psi = np.exp(-((x - x_c) ** 2) / (4.0 * width ** 2) + 1j * k0 * x)
    psi /= np.sqrt(inner_1d(psi, psi, grid).real)
    return psi


def build_product_state(alpha: np.ndarray, beta: np.ndarray, sign: int,
                        grid: Grid, m_s: int = 0) -> TwoBodyState:
    """(Anti)symmetrized normalized product of two orbitals.

    psi[j, k] = (alpha_j beta_k + sign * beta_j alpha_k) / norm.  For
    sign = -1 with (numerically) parallel orbitals the state vanishes and a
    ValueError is raised instead of dividing by zero.
    """
    ov = inner_1d(alpha, beta, grid)
    na = inner_1d(alpha, alpha, grid).real
    nb = inner_1d(beta, beta, grid).real
    norm_sq = na * nb + sign * abs(ov) ** 2
    if norm_sq <= 1e-14 * na * nb:
        raise ValueError("antisymmetrized product of parallel orbitals vanishes")
    psi = np.outer(alpha, beta) + sign * np.outer(beta, alpha)
    psi /= np.sqrt(2.0 * norm_sq)
    sector, spinor = spin_labels(sign, m_s)
    return TwoBodyState(psi, sign, sector)


def vacuum_rho1(grid: Grid, sign: int, m_s: int = 0) -> OneBodyDensity:
    _, spinor = spin_labels(sign, m_s)
    return OneBodyDensity(np.zeros((grid.n_points, grid.n_points), dtype=complex),
                          spinor)


def initial_system_state(psi2: TwoBodyState, grid: Grid, m_s: int = 0) -> SystemState:
    """Hierarchy state that is entirely in the two-particle block."""
    p2 = two_body_norm_sq(psi2.psi, grid)
    if abs(p2 - 1.0) > 1e-10:
        raise ValueError(f"two-particle block not normalized: P(2) = {p2!r}")
    return SystemState(psi2, vacuum_rho1(grid, psi2.sign, m_s), 0.0, 0.0)


def source_matrix(psi2: np.ndarray, gamma: np.ndarray, grid: Grid) -> np.ndarray:
    """Feeding term of the one-particle block.

    S[k, l] = 2 h * sum_j gamma_j psi2[j, k] conj(psi2[j, l]); Hermitian and
    positive semidefinite by construction.  The factor 2 counts both
    particles, which contribute equally by exchange symmetry.  Computed as
    a Hermitian rank-k update of the weighted absorber rows.
    """
    nz = np.flatnonzero(gamma)
    if nz.size == 0:
        n = psi2.shape[0]
        return np.zeros((n, n), dtype=complex)
    u = np.multiply(psi2[nz, :].T, np.sqrt(gamma[nz]))
    upper = blas.zherk(2.0 * grid.h, u, lower=0)
    s = upper + upper.conj().T
    np.fill_diagonal(s, upper.diagonal().real)
    return s


def enforce_invariants(state: SystemState, grid: Grid,
                       hard_bound: float = 1e-4,
                       check_eigenvalues: bool = False) -> tuple[SystemState, dict]:
    """Re-symmetrize the state blocks and report consistency diagnostics.

    psi2 is projected back onto its exchange sector and rho1 onto Hermitian
    matrices; the projection defects are returned along with the total trace
    drift.  Drift beyond ``hard_bound`` raises :class:`TraceDriftError`.
    With ``check_eigenvalues`` the smallest rho1 eigenvalue is included
    (an O(n^3) diagnostic, intended for output strides only).
    """
    psi = state.psi2.psi
    sym = 0.5 * (psi + state.psi2.sign * psi.T)
    psi_defect = float(np.max(np.abs(psi - sym))) if psi.size else 0.0

    rho = state.rho1.mat
    herm = 0.5 * (rho + rho.conj().T)
    rho_defect = float(np.max(np.abs(rho - herm))) if rho.size else 0.0

    p2 = two_body_norm_sq(sym, grid)
    p1 = one_body_trace(herm, grid)
    drift = p2 + p1 + state.p0 - 1.0
    diag = {
        "trace_drift": drift,
        "exchange_defect": psi_defect,
        "hermiticity_defect": rho_defect,
    }
    if check_eigenvalues:
        evals = np.linalg.eigvalsh(herm)
        diag["rho1_min_eigenvalue"] = float(evals[0]) * grid.h
        diag["rho1_trace"] = p1
    if abs(drift) > hard_bound:
        raise TraceDriftError(
            f"trace drift {drift:.3e} exceeds hard bound {hard_bound:.1e} "
            f"at t = {state.t!r}")
    new = SystemState(
        replace(state.psi2, psi=sym),
        replace(state.rho1, mat=herm),
        state.p0, state.t)
    return new, diag
