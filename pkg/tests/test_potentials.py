"""Static potentials, interaction kernel, and pulse envelope."""

import numpy as np
import pytest

from fermicap.grid import make_grid
from fermicap.potentials import (
    InteractionSpec,
    PotentialSpec,
    PulseSpec,
    eval_interaction,
    eval_potential,
    eval_pulse,
    interaction_matrix,
    potential_on_grid,
)


def test_gaussian_well_values():
    spec = PotentialSpec(kind="gaussian_well", v0=4.0, x0=20.0, sigma=0.75)
    assert eval_potential(spec, np.array([20.0]))[0] == pytest.approx(-4.0)
    x = np.array([20.0 + 0.75])
    assert eval_potential(spec, x)[0] == pytest.approx(-4.0 * np.exp(-0.5))


def test_soft_coulomb_values():
    spec = PotentialSpec(kind="soft_coulomb", z=2.0, delta_n_sq=0.5)
    assert eval_potential(spec, np.array([0.0]))[0] == pytest.approx(-2.0 / np.sqrt(0.5))
    x = np.array([3.0])
    assert eval_potential(spec, x)[0] == pytest.approx(-2.0 / np.sqrt(9.5))


def test_none_potential_is_zero():
    spec = PotentialSpec(kind="none")
    x = np.linspace(-5, 5, 11)
    assert np.all(eval_potential(spec, x) == 0.0)


def test_potential_spec_validation():
    with pytest.raises(ValueError):
        PotentialSpec(kind="gaussian_well", v0=4.0, x0=0.0, sigma=0.0)
    with pytest.raises(ValueError):
        PotentialSpec(kind="soft_coulomb", z=2.0, delta_n_sq=-1.0)
    with pytest.raises(ValueError):
        PotentialSpec(kind="banana")


def test_potential_on_grid_shape():
    g = make_grid(x_max=10.0, n_points=32)
    spec = PotentialSpec(kind="gaussian_well", v0=1.0, x0=5.0, sigma=1.0)
    v = potential_on_grid(spec, g)
    assert v.shape == (32,)
    assert np.argmin(v) == np.argmin(np.abs(g.x - 5.0))


def test_interaction_symmetric_and_peaked():
    spec = InteractionSpec(lam=5.0, delta_c=0.1)
    x1 = np.array([1.0, 1.3, 0.7, 3.0])
    x2 = np.full(4, 1.0)
    u = eval_interaction(spec, x1, x2)
    assert u[0] == pytest.approx(5.0 / 0.1)
    assert u[1] == pytest.approx(u[2])
    assert u[0] > u[1] > u[3] > 0.0
    assert np.allclose(eval_interaction(spec, x2, x1), u)


def test_interaction_matrix_structure():
    g = make_grid(x_max=4.0, n_points=8)
    spec = InteractionSpec(lam=2.0, delta_c=0.5)
    u = interaction_matrix(spec, g)
    assert u.shape == (8, 8)
    assert np.allclose(u, u.T)
    direct = 2.0 / np.sqrt((g.x[:, None] - g.x[None, :]) ** 2 + 0.25)
    assert np.allclose(u, direct)


def test_interaction_zero_strength():
    g = make_grid(x_max=4.0, n_points=8)
    u = interaction_matrix(InteractionSpec(lam=0.0, delta_c=0.5), g)
    assert np.all(u == 0.0)


def test_pulse_envelope_shape():
    spec = PulseSpec(e0=5.0, omega=3.2, duration=10.0)
    # Zero at the ends, e0 * cos(omega t) in the middle.
    assert eval_pulse(spec, 0.0) == 0.0
    assert eval_pulse(spec, 10.0) == pytest.approx(0.0, abs=1e-14)
    mid = eval_pulse(spec, 5.0)
    assert mid == pytest.approx(5.0 * np.cos(3.2 * 5.0))
    quarter = eval_pulse(spec, 2.5)
    assert quarter == pytest.approx(5.0 * 0.5 * np.cos(3.2 * 2.5))


def test_pulse_outside_window_is_zero():
    spec = PulseSpec(e0=5.0, omega=3.2, duration=4.0)
    assert eval_pulse(spec, -0.1) == 0.0
    assert eval_pulse(spec, 4.1) == 0.0
    assert eval_pulse(spec, 1e9) == 0.0


def test_pulse_from_cycles():
    spec = PulseSpec.from_cycles(e0=1.0, omega=2.0, n_cycles=3)
    assert spec.duration == pytest.approx(3 * 2.0 * np.pi / 2.0)


def test_pulse_zero_amplitude():
    spec = PulseSpec(e0=0.0, omega=1.0, duration=5.0)
    assert eval_pulse(spec, 2.0) == 0.0
