"""Dense Fock-space reference dynamics on tiny grids.

Everything here is built from second-quantized ladder operators as explicit
dense matrices on the truncated Fock space vac + one particle + two
particles, so the loss terms, Hamiltonian and trace bookkeeping follow from
operator algebra rather than from the split-step engine's conventions.  The
construction is deliberately slow and is capped at 8 grid points; its only
job is to validate the production propagators on problems small enough to
integrate exactly.

The master equation integrated here is

    d(rho)/dt = -(i/hbar) (H_eff rho - rho H_eff^dag)
                + (2/hbar) sum_j gamma_j c_j rho c_j^dag,

with H_eff = H - i sum_j gamma_j n_j, the same equation the engine
discretizes block by block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .dynamics import PropagatorContext, step_p0, step_psi2, step_rho1
from .grid import Grid, kinetic_matrix
from .state import SystemState, source_matrix

MAX_ORACLE_POINTS = 8


@dataclass(frozen=True)
class FockBasis:
    """Number basis of the truncated Fock space for one exchange sector.

    States are ordered vacuum, then the m one-particle states, then the
    pair states (p, q) with p < q for an antisymmetric sector (sign = -1)
    and p <= q for a symmetric one (sign = +1).
    """

    grid: Grid
    sign: int
    pairs: tuple = field(init=False)
    dim: int = field(init=False)

    def __post_init__(self):
        m = self.grid.n_points
        if m > MAX_ORACLE_POINTS:
            raise ValueError(f"reference basis capped at {MAX_ORACLE_POINTS} points")
        if self.sign == -1:
            pairs = tuple((p, q) for p in range(m) for q in range(p + 1, m))
        elif self.sign == 1:
            pairs = tuple((p, q) for p in range(m) for q in range(p, m))
        else:
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "dim", 1 + m + len(pairs))

    @property
    def m(self) -> int:
        return self.grid.n_points

    def one_index(self, r: int) -> int:
        return 1 + r

    def pair_index(self, p: int, q: int) -> int:
        return 1 + self.m + self.pairs.index((p, q) if p <= q else (q, p))

    def sector_slices(self) -> tuple[slice, slice, slice]:
        m = self.m
        return slice(0, 1), slice(1, 1 + m), slice(1 + m, self.dim)


def annihilators(basis: FockBasis) -> list[np.ndarray]:
    """Dense matrices of the point annihilation operators c_j.

    c_j removes a particle at grid point j: it maps the one-particle states
    to the vacuum and the pair states to one-particle states with the sign
    (and, for doubly occupied symmetric states, sqrt(2) weight) dictated by
    the exchange algebra.
    """
    m, d = basis.m, basis.dim
    ops = []
    for j in range(m):
        c = np.zeros((d, d))
        c[0, basis.one_index(j)] = 1.0
        for (p, q) in basis.pairs:
            col = basis.pair_index(p, q)
            if basis.sign == -1:
                if j == p:
                    c[basis.one_index(q), col] += 1.0
                if j == q:
                    c[basis.one_index(p), col] -= 1.0
            else:
                w = 1.0 / np.sqrt(2.0) if p == q else 1.0
                if j == p:
                    c[basis.one_index(q), col] += w
                if j == q:
                    c[basis.one_index(p), col] += w
        ops.append(c)
    return ops


@dataclass
class DenseGenerator:
    """Lindblad generator assembled from the ladder matrices."""

    basis: FockBasis
    h_full: np.ndarray
    gamma_vec: np.ndarray
    c_ops: list[np.ndarray]
    hbar: float = 1.0

    @property
    def h_eff(self) -> np.ndarray:
        gamma_full = sum(g * (c.T @ c) for g, c in zip(self.gamma_vec, self.c_ops))
        return self.h_full - 1j * gamma_full

    def action(self, rho: np.ndarray) -> np.ndarray:
        he = self.h_eff
        out = (-1j / self.hbar) * (he @ rho - rho @ he.conj().T)
        for g, c in zip(self.gamma_vec, self.c_ops):
            if g != 0.0:
                out += (2.0 * g / self.hbar) * (c @ rho @ c.T)
        return out

    def superoperator(self) -> np.ndarray:
        """Dense matrix of the generator on row-major vectorized states."""
        d = self.basis.dim
        eye = np.eye(d)
        he = self.h_eff
        sup = (-1j / self.hbar) * (np.kron(he, eye) - np.kron(eye, he.conj()))
        for g, c in zip(self.gamma_vec, self.c_ops):
            if g != 0.0:
                sup = sup + (2.0 * g / self.hbar) * np.kron(c, c.conj())
        return sup


def build_generator(grid: Grid, v_static: np.ndarray,
                    u_matrix: np.ndarray | None, gamma: np.ndarray,
                    sign: int, hbar: float = 1.0, mass: float = 1.0,
                    ) -> DenseGenerator:
    """Assemble the dense generator from one-body matrices on a tiny grid.

    The Hamiltonian is built operator by operator, sum_ij h_ij c_i^dag c_j
    plus half the density-density interaction, so both particle sectors are
    consistent with each other by construction.
    """
    basis = FockBasis(grid, sign)
    ops = annihilators(basis)
    h1 = kinetic_matrix(grid, mass=mass, hbar=hbar) + np.diag(v_static)
    d = basis.dim
    h_full = np.zeros((d, d), dtype=complex)
    for i in range(basis.m):
        for j in range(basis.m):
            if h1[i, j] != 0.0:
                h_full += h1[i, j] * (ops[i].T @ ops[j])
    if u_matrix is not None and np.any(u_matrix):
        number = [c.T @ c for c in ops]
        for i in range(basis.m):
            for j in range(basis.m):
                if u_matrix[i, j] != 0.0:
                    nn = number[i] @ number[j]
                    if i == j:
                        nn = nn - number[i]
                    h_full += 0.5 * u_matrix[i, j] * nn
    return DenseGenerator(basis, h_full, np.asarray(gamma, dtype=float), ops,
                          hbar=hbar)


def integrate_rk4(gen: DenseGenerator, rho0: np.ndarray, t_end: float,
                  dt: float) -> np.ndarray:
    """Classic fourth-order integration of the dense master equation."""
    n_steps = int(round(t_end / dt))
    rho = rho0.astype(complex)
    for _ in range(n_steps):
        k1 = gen.action(rho)
        k2 = gen.action(rho + 0.5 * dt * k1)
        k3 = gen.action(rho + 0.5 * dt * k2)
        k4 = gen.action(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rho


def integrate_expm(gen: DenseGenerator, rho0: np.ndarray,
                   t_end: float) -> np.ndarray:
    """Exact propagation by exponentiating the vectorized generator."""
    sup = gen.superoperator()
    vec = expm(sup * t_end) @ rho0.reshape(-1)
    return vec.reshape(rho0.shape)


def verify_block_flow_direction(gen: DenseGenerator, rng=None) -> dict:
    """Check which number blocks feed which under the generator.

    Applies the generator to random matrices supported on single block
    pairs and records where the output lands.  The coherent part must stay
    within the source block pair; the loss part must move exactly one
    particle off both sides.  Returns a dict of boolean verdicts.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    slices = gen.basis.sector_slices()
    d = gen.basis.dim
    verdict = {}
    for a in range(3):
        for b in range(3):
            probe = np.zeros((d, d), dtype=complex)
            blk = rng.standard_normal((slices[a].stop - slices[a].start,
                                       slices[b].stop - slices[b].start))
            probe[slices[a], slices[b]] = blk
            out = gen.action(probe)
            for a2 in range(3):
                for b2 in range(3):
                    mag = float(np.max(np.abs(out[slices[a2], slices[b2]])))
                    if mag > 1e-12:
                        allowed = (a2 == a and b2 == b) or (a2 == a - 1 and b2 == b - 1)
                        key = f"({a},{b})->({a2},{b2})"
                        verdict[key] = allowed
    verdict["ok"] = all(verdict.values())
    return verdict


def psi2_to_fock(psi: np.ndarray, basis: FockBasis) -> np.ndarray:
    """Two-particle grid amplitude to a normalized Fock-sector vector.

    Off-diagonal pairs carry sqrt(2) h psi(p, q); diagonal pairs (symmetric
    sector only) carry h psi(p, p).
    """
    h = basis.grid.h
    v = np.zeros(basis.dim, dtype=complex)
    for (p, q) in basis.pairs:
        w = h if p == q else np.sqrt(2.0) * h
        v[basis.pair_index(p, q)] = w * psi[p, q]
    return v


def fock_to_psi2(v: np.ndarray, basis: FockBasis) -> np.ndarray:
    m, h = basis.m, basis.grid.h
    psi = np.zeros((m, m), dtype=complex)
    for (p, q) in basis.pairs:
        w = h if p == q else np.sqrt(2.0) * h
        psi[p, q] = v[basis.pair_index(p, q)] / w
        psi[q, p] = basis.sign * psi[p, q]
    return psi


def embed_state(state: SystemState, basis: FockBasis) -> np.ndarray:
    """Full density matrix of a hierarchy state on the truncated Fock space.

    The one-particle grid density maps to its Fock block as h * rho1.
    """
    d = basis.dim
    rho = np.zeros((d, d), dtype=complex)
    s0, s1, s2 = basis.sector_slices()
    rho[0, 0] = state.p0
    rho[s1, s1] = basis.grid.h * state.rho1.mat
    v = psi2_to_fock(state.psi2.psi, basis)[s2]
    rho[s2, s2] = np.outer(v, v.conj())
    return rho


def block_deviations(rho_a: np.ndarray, rho_b: np.ndarray,
                     basis: FockBasis) -> dict:
    """Blockwise max-abs differences of two Fock density matrices."""
    s0, s1, s2 = basis.sector_slices()
    def mx(sl):
        return float(np.max(np.abs(rho_a[sl, sl] - rho_b[sl, sl])))
    return {
        "p0": mx(s0),
        "rho1": mx(s1),
        "psi2": mx(s2),
        "max": max(mx(s0), mx(s1), mx(s2)),
    }


def engine_vs_oracle(grid: Grid, v_static: np.ndarray,
                     u_matrix: np.ndarray | None, gamma: np.ndarray,
                     sign: int, psi0: np.ndarray, t_end: float,
                     dt_engine: float, oracle_refinement: int = 20,
                     hbar: float = 1.0, mass: float = 1.0) -> dict:
    """Propagate one initial state with both machines and compare blocks.

    The engine takes split steps of dt_engine; the dense reference
    integrates the same master equation with fourth-order steps finer by
    ``oracle_refinement``.  Returns the blockwise deviations at t_end.
    """
    ctx = PropagatorContext(grid, v_static, u_matrix, np.asarray(gamma, float),
                            dt_engine, pulse=None, hbar=hbar, mass=mass)
    n_steps = int(round(t_end / dt_engine))
    psi = psi0.astype(complex)
    rho = np.zeros((grid.n_points, grid.n_points), dtype=complex)
    p0 = 0.0
    s_now = source_matrix(psi, ctx.gamma, grid)
    for i in range(n_steps):
        t = i * dt_engine
        psi_new = step_psi2(psi, ctx, t)
        s_new = source_matrix(psi_new, ctx.gamma, grid)
        rho_new = step_rho1(rho, ctx, t, s_start=s_now, s_end=s_new)
        p0 = step_p0(p0, rho, rho_new, ctx.gamma, grid, dt_engine, hbar)
        psi, rho, s_now = psi_new, rho_new, s_new

    gen = build_generator(grid, v_static, u_matrix, gamma, sign,
                          hbar=hbar, mass=mass)
    rho0_full = np.zeros((gen.basis.dim, gen.basis.dim), dtype=complex)
    s2 = gen.basis.sector_slices()[2]
    v0 = psi2_to_fock(psi0, gen.basis)[s2]
    rho0_full[s2, s2] = np.outer(v0, v0.conj())
    rho_ref = integrate_rk4(gen, rho0_full, t_end,
                            dt_engine / oracle_refinement)

    # engine result embedded in the same basis
    eng = np.zeros_like(rho0_full)
    s0, s1, _ = gen.basis.sector_slices()
    eng[0, 0] = p0
    eng[s1, s1] = grid.h * rho
    v_t = psi2_to_fock(psi, gen.basis)[s2]
    eng[s2, s2] = np.outer(v_t, v_t.conj())
    out = block_deviations(eng, rho_ref, gen.basis)
    out["trace_ref"] = float(np.trace(rho_ref).real)
    return out
