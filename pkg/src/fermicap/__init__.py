"""Two-particle quantum dynamics with absorbing boundaries, resolved by
particle number.

The absorber at the box edges is promoted from a non-Hermitian trick to the
jump operators of a master equation, so the lost norm is accounted for as
population of one- and zero-particle sectors instead of disappearing.  The
package propagates the two-particle amplitude, the one-particle density
matrix it feeds, and the vacuum weight, and ships the experiment drivers,
a dense Fock-space reference implementation, and a small CLI.
"""

from .caps import CapSpec, cap_on_grid
from .config import ExperimentConfig, load_config, parse_config, serialize_config
from .dynamics import (PropagatorContext, Schedule, imaginary_time_ground_state,
                       one_body_modes, run_simulation, step_p0, step_psi2,
                       step_rho1)
from .grid import Grid, apply_kinetic_1d, apply_kinetic_2d, make_grid
from .observables import (ObservableRow, Snapshot, cond_purity, densities,
                          entropy, partial_traces, purity)
from .potentials import InteractionSpec, PotentialSpec, PulseSpec
from .state import (OneBodyDensity, SystemState, TraceDriftError, TwoBodyState,
                    build_product_state, gaussian_packet, source_matrix)

__version__ = "0.1.0"

__all__ = [
    "CapSpec", "cap_on_grid",
    "ExperimentConfig", "load_config", "parse_config", "serialize_config",
    "PropagatorContext", "Schedule", "imaginary_time_ground_state",
    "one_body_modes", "run_simulation", "step_p0", "step_psi2", "step_rho1",
    "Grid", "apply_kinetic_1d", "apply_kinetic_2d", "make_grid",
    "ObservableRow", "Snapshot", "cond_purity", "densities", "entropy",
    "partial_traces", "purity",
    "InteractionSpec", "PotentialSpec", "PulseSpec",
    "OneBodyDensity", "SystemState", "TraceDriftError", "TwoBodyState",
    "build_product_state", "gaussian_packet", "source_matrix",
    "__version__",
]
