"""Complex absorbing potentials at the box boundaries.

The absorber enters the dynamics as the anti-Hermitian part -i*Gamma(x) of
the effective one-body Hamiltonian, with Gamma >= 0 supported on layers next
to the periodic seam of the box and vanishing identically in the interior.

Two profiles are provided:

* ``power``: Gamma = strength * (1 - d/x_t)^order, for distance d < x_t from
  the nearer box edge.
* ``manolopoulos``: the transmission-free profile
  Gamma = E_min * (a*y - b*y^3 + 4/(c-y)^2 - 4/(c+y)^2), y in [0, c), built
  from the single accuracy parameter delta and the lowest absorbed momentum
  k_min.  E_min = hbar^2 k_min^2 / (2m), and the layer width follows as
  c / (2 delta k_min).  The profile diverges at y = c, so the singular
  points are anchored half a grid cell outside the last grid point of each
  layer, at the midpoint of the wrap-around cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid

CAP_KINDS = ("power", "manolopoulos", "none")

# Transmission-free profile constants: c is the universal dimensionless
# endpoint, a and b follow from requiring zero transmission at all energies.
MANOLOPOULOS_C = 2.62206
MANOLOPOULOS_A = 1.0 - 16.0 / MANOLOPOULOS_C ** 3
MANOLOPOULOS_B = (1.0 - 17.0 / MANOLOPOULOS_C ** 3) / MANOLOPOULOS_C ** 2


@dataclass(frozen=True)
class CapSpec:
    """Absorber parameters.

    For ``kind = "power"``: ``strength``, ``order`` and ``x_t`` (layer
    width).  For ``kind = "manolopoulos"``: ``delta`` plus exactly one of
    ``k_min`` or ``x_t`` (the other follows).  ``kind = "none"`` disables
    absorption.
    """

    kind: str = "none"
    strength: float = 0.0
    order: int = 3
    x_t: float | None = None
    delta: float | None = None
    k_min: float | None = None

    def __post_init__(self):
        if self.kind not in CAP_KINDS:
            raise ValueError(f"unknown cap kind {self.kind!r}")
        if self.kind == "power":
            if self.strength <= 0:
                raise ValueError("power cap needs strength > 0")
            if self.x_t is None or self.x_t <= 0:
                raise ValueError("power cap needs x_t > 0")
            if int(self.order) != self.order or self.order < 1:
                raise ValueError("power cap order must be an integer >= 1")
        if self.kind == "manolopoulos":
            if self.delta is None or self.delta <= 0:
                raise ValueError("manolopoulos cap needs delta > 0")
            if (self.k_min is None) == (self.x_t is None):
                raise ValueError("give exactly one of k_min or x_t")
            given = self.k_min if self.k_min is not None else self.x_t
            if given <= 0:
                raise ValueError("k_min / x_t must be positive")


def manolopoulos_width(delta: float, k_min: float) -> float:
    """Layer width of the transmission-free absorber."""
    return MANOLOPOULOS_C / (2.0 * delta * k_min)


def eval_manolopoulos(x, sing_lo: float, sing_hi: float, delta: float,
                      k_min: float, mass: float = 1.0,
                      hbar: float = 1.0) -> np.ndarray:
    """Transmission-free profile with singular points at ``sing_lo/hi``.

    ``x`` must lie strictly between the singular points; the profile rises
    toward each of them and diverges there, so coincidence is rejected.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= sing_lo) or np.any(x >= sing_hi):
        raise ValueError("singular endpoint coincides with or precedes a grid point")
    e_min = (hbar * k_min) ** 2 / (2.0 * mass)
    d = np.minimum(x - sing_lo, sing_hi - x)
    y = MANOLOPOULOS_C - 2.0 * delta * k_min * d
    c = MANOLOPOULOS_C
    out = np.zeros_like(x)
    m = y > 0.0
    ym = y[m]
    out[m] = e_min * (MANOLOPOULOS_A * ym - MANOLOPOULOS_B * ym ** 3
                      + 4.0 / (c - ym) ** 2 - 4.0 / (c + ym) ** 2)
    return out


def eval_power(x, edge_lo: float, edge_hi: float, strength: float,
               order: int, x_t: float) -> np.ndarray:
    """Monomial profile rising over the last ``x_t`` before each edge."""
    x = np.asarray(x, dtype=float)
    d = np.minimum(x - edge_lo, edge_hi - x)
    out = np.zeros_like(x)
    m = d < x_t
    out[m] = strength * ((x_t - d[m]) / x_t) ** order
    return out


def cap_on_grid(spec: CapSpec, grid: Grid, mass: float = 1.0,
                hbar: float = 1.0) -> np.ndarray:
    """Absorber values on the grid points, validated nonnegative."""
    lo = grid.x_offset
    hi = grid.x_offset + grid.x_max
    if spec.kind == "none":
        gamma = np.zeros(grid.n_points)
    elif spec.kind == "power":
        if 2.0 * spec.x_t >= grid.x_max:
            raise ValueError("absorbing layers cover the whole box: 2*x_t "
                             f"= {2 * spec.x_t} >= x_max = {grid.x_max}")
        gamma = eval_power(grid.x, lo, hi, spec.strength, spec.order, spec.x_t)
    else:
        if spec.k_min is not None:
            k_min = spec.k_min
        else:
            # interpret x_t as the requested layer width
            k_min = MANOLOPOULOS_C / (2.0 * spec.delta * spec.x_t)
        if 2.0 * manolopoulos_width(spec.delta, k_min) >= grid.x_max:
            raise ValueError("absorbing layers cover the whole box")
        # singular points half a cell outside the layers' last grid points,
        # i.e. at the midpoint of the wrap-around cell on either side
        gamma = eval_manolopoulos(grid.x, lo - 0.5 * grid.h, hi - 0.5 * grid.h,
                                  spec.delta, k_min, mass=mass, hbar=hbar)
    if np.any(gamma < 0.0) or not np.all(np.isfinite(gamma)):
        raise ValueError("absorber profile must be finite and nonnegative")
    return gamma
