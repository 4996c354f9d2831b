"""Static potentials, pair interaction and the driving pulse.

Two one-body potentials are supported: an attractive Gaussian well

    V(x) = -v0 * exp(-(x - x0)^2 / (2 sigma^2))

and a soft-core nuclear attraction

    V(x) = -z / sqrt((x - x0)^2 + delta_n_sq)

The pair interaction is a repulsive soft-core Coulomb term evaluated on the
direct particle distance,

    U(x1, x2) = lam / sqrt((x1 - x2)^2 + delta_c^2)

and the laser pulse enters in length gauge through a sin^2 envelope,

    E(t) = e0 * sin^2(pi t / duration) * cos(omega t)   for 0 <= t <= duration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid

POTENTIAL_KINDS = ("gaussian_well", "soft_coulomb", "none")


@dataclass(frozen=True)
class PotentialSpec:
    """One-body potential parameters.

    ``kind`` selects the functional form; fields not used by that form are
    ignored.  ``z`` is the attraction strength of the soft-core form and
    ``v0`` the depth of the Gaussian well (both entered positive).
    """

    kind: str = "none"
    v0: float = 0.0
    x0: float = 0.0
    sigma: float = 1.0
    z: float = 0.0
    delta_n_sq: float = 1.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "gaussian_well" and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.kind == "soft_coulomb" and self.delta_n_sq <= 0:
            raise ValueError("delta_n_sq must be positive")


@dataclass(frozen=True)
class InteractionSpec:
    """Soft-core pair repulsion; ``lam = 0`` switches it off."""

    lam: float = 0.0
    delta_c: float = 1.0

    def __post_init__(self):
        if self.lam != 0.0 and self.delta_c <= 0:
            raise ValueError("delta_c must be positive")


@dataclass(frozen=True)
class PulseSpec:
    """Length-gauge electric pulse with a sin^2 envelope.

    ``duration`` is the total pulse length; outside ``[0, duration]`` the
    field vanishes identically.
    """

    e0: float
    omega: float
    duration: float

    def __post_init__(self):
        if self.omega <= 0 or self.duration <= 0:
            raise ValueError("omega and duration must be positive")

    @classmethod
    def from_cycles(cls, e0: float, omega: float, n_cycles: float) -> "PulseSpec":
        return cls(e0, omega, n_cycles * 2.0 * np.pi / omega)


def eval_potential(spec: PotentialSpec, x) -> np.ndarray:
    """Evaluate the static one-body potential at positions ``x``."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "gaussian_well":
        return -spec.v0 * np.exp(-((x - spec.x0) ** 2) / (2.0 * spec.sigma ** 2))
    if spec.kind == "soft_coulomb":
        return -spec.z / np.sqrt((x - spec.x0) ** 2 + spec.delta_n_sq)
    return np.zeros_like(x)


def potential_on_grid(spec: PotentialSpec, grid: Grid) -> np.ndarray:
    return eval_potential(spec, grid.x)


def eval_interaction(spec: InteractionSpec, x1, x2) -> np.ndarray:
    """Pair repulsion on the direct distance ``x1 - x2`` (no periodic images)."""
    if spec.lam == 0.0:
        return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
    return spec.lam / np.sqrt((np.asarray(x1) - np.asarray(x2)) ** 2 + spec.delta_c ** 2)


def interaction_matrix(spec: InteractionSpec, grid: Grid) -> np.ndarray:
    """``U[i, j] = U(x_i, x_j)`` for the two-particle phase factors."""
    return eval_interaction(spec, grid.x[:, None], grid.x[None, :])


def eval_pulse(spec: PulseSpec | None, t: float) -> float:
    """Electric field at time ``t``; zero without a pulse or outside it."""
    if spec is None:
        return 0.0
    if t < 0.0 or t > spec.duration:
        return 0.0
    envelope = np.sin(np.pi * t / spec.duration) ** 2
    return spec.e0 * envelope * np.cos(spec.omega * t)
