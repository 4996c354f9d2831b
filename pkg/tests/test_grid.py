"""Grid construction and spectral kinetic-operator checks."""

import numpy as np
import pytest

from fermicap.grid import Grid, apply_kinetic_1d, apply_kinetic_2d, kinetic_matrix, make_grid


def dft_kinetic_oracle(grid: Grid, hbar: float = 1.0, mass: float = 1.0) -> np.ndarray:
    """Dense kinetic matrix built from the plain DFT definition.

    Independent of the fft-based code path: assembles the unitary DFT matrix
    explicitly, multiplies by the quadratic symbol, and transforms back.
    """
    n = grid.n_points
    j = np.arange(n)
    f = np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)
    t_k = (hbar * grid.k) ** 2 / (2.0 * mass)
    return f.conj().T @ np.diag(t_k) @ f


def test_make_grid_basic():
    g = make_grid(x_max=8.0, n_points=16)
    assert g.h == pytest.approx(0.5)
    assert g.x[0] == 0.0
    assert g.x[-1] == pytest.approx(8.0 - 0.5)
    assert g.x.flags.writeable is False
    assert g.k.flags.writeable is False


def test_make_grid_offset():
    g = make_grid(x_max=10.0, n_points=20, x_offset=-5.0)
    assert g.x[0] == pytest.approx(-5.0)
    assert np.all(np.diff(g.x) > 0)
    assert g.x[-1] == pytest.approx(5.0 - g.h)


def test_make_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        make_grid(x_max=-1.0, n_points=16)
    with pytest.raises(ValueError):
        make_grid(x_max=4.0, n_points=3)
    with pytest.raises(ValueError):
        make_grid(x_max=4.0, n_points=16.5)  # type: ignore[arg-type]


def test_wavenumbers_match_dft_convention():
    g = make_grid(x_max=4.0, n_points=8)
    dk = 2.0 * np.pi / 4.0
    expected = dk * np.array([0, 1, 2, 3, -4, -3, -2, -1], dtype=float)
    assert np.allclose(g.k, expected)


def test_apply_kinetic_1d_matches_dft_oracle():
    rng = np.random.default_rng(7)
    g = make_grid(x_max=5.0, n_points=32)
    t_dense = dft_kinetic_oracle(g)
    for _ in range(5):
        psi = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        assert np.allclose(apply_kinetic_1d(psi, g), t_dense @ psi, atol=1e-12)


def test_kinetic_matrix_matches_dft_oracle():
    g = make_grid(x_max=3.0, n_points=24)
    t_dense = dft_kinetic_oracle(g)
    t_code = kinetic_matrix(g)
    assert np.allclose(t_code, t_dense, atol=1e-12)
    assert np.allclose(t_code, t_code.conj().T, atol=1e-13)


def test_kinetic_plane_wave_eigenvalue():
    g = make_grid(x_max=2.0 * np.pi, n_points=64)
    for m in (1, 3, 7):
        psi = np.exp(1j * m * g.x)
        out = apply_kinetic_1d(psi, g)
        assert np.allclose(out, 0.5 * m**2 * psi, atol=1e-10)


def test_kinetic_spectral_accuracy_gaussian():
    # A well-resolved gaussian: spectral derivative should hit near machine
    # precision against the analytic second derivative.
    g = make_grid(x_max=28.0, n_points=256, x_offset=-14.0)
    sigma = 1.1
    psi = np.exp(-(g.x**2) / (2.0 * sigma**2))
    d2 = psi * (g.x**2 / sigma**4 - 1.0 / sigma**2)
    assert np.max(np.abs(apply_kinetic_1d(psi, g) - (-0.5 * d2))) < 1e-11


def test_apply_kinetic_2d_separable():
    rng = np.random.default_rng(3)
    g = make_grid(x_max=4.0, n_points=16)
    a = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    b = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    psi = np.outer(a, b)
    expected = np.outer(apply_kinetic_1d(a, g), b) + np.outer(a, apply_kinetic_1d(b, g))
    assert np.allclose(apply_kinetic_2d(psi, g), expected, atol=1e-12)


def test_apply_kinetic_2d_against_dense_sum():
    rng = np.random.default_rng(11)
    g = make_grid(x_max=3.0, n_points=12)
    t_dense = dft_kinetic_oracle(g)
    psi = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    expected = t_dense @ psi + psi @ t_dense.T
    assert np.allclose(apply_kinetic_2d(psi, g), expected, atol=1e-12)


def test_kinetic_mass_and_hbar_scaling():
    g = make_grid(x_max=4.0, n_points=32)
    rng = np.random.default_rng(5)
    psi = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    base = apply_kinetic_1d(psi, g)
    assert np.allclose(apply_kinetic_1d(psi, g, mass=2.0), base / 2.0)
    assert np.allclose(apply_kinetic_1d(psi, g, hbar=2.0), base * 4.0)
