import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dipolesim.grid import (
    FieldState,
    Grid1D,
    biharmonic,
    gradient,
    laplacian,
    spatial_mean,
    spectral_multipliers,
)


def random_field(n=64, seed=0, amp=1.0):
    rng = np.random.default_rng(seed)
    return FieldState(Grid1D(n), amp * rng.standard_normal(n))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(4)
    with pytest.raises(ValueError):
        Grid1D(16, dx=0.0)
    g = Grid1D(16, dx=0.5)
    assert g.length == 8.0
    assert np.allclose(g.sites(), 0.5 * np.arange(16))


def test_field_validation():
    g = Grid1D(8)
    with pytest.raises(ValueError):
        FieldState(g, np.zeros(7))
    with pytest.raises(ValueError):
        FieldState(g, np.full(8, np.inf))


def test_laplacian_constant_is_zero():
    f = FieldState(Grid1D(32), np.full(32, 3.7))
    assert np.all(laplacian(f).values == 0.0)
    assert np.all(biharmonic(f).values == 0.0)


def test_laplacian_cosine_eigenfield():
    # stencil eigenvalue -(2/dx^2)(1 - cos k dx) on one full period
    n, dx = 32, 0.5
    g = Grid1D(n, dx)
    k = 2 * np.pi / (n * dx)
    f = FieldState(g, np.cos(k * g.sites()))
    expected = -(2.0 / dx**2) * (1.0 - np.cos(k * dx))
    assert np.allclose(laplacian(f).values, expected * f.values, atol=1e-12)


def test_laplacian_exact_on_quadratic_interior():
    # central stencil is exact on quadratics away from the wrap
    g = Grid1D(32, periodic=False)
    x = g.sites()
    f = FieldState(g, 0.5 * x * x)
    lap = laplacian(f).values
    assert np.allclose(lap[1:-1], 1.0, atol=1e-12)
    bih = biharmonic(f).values
    assert np.allclose(bih[2:-2], 0.0, atol=1e-12)


def test_biharmonic_is_laplacian_squared():
    f = random_field(48, seed=1)
    assert np.array_equal(biharmonic(f).values, laplacian(laplacian(f)).values)


def test_spectral_multiplier_endpoints():
    g = Grid1D(16, dx=0.5)
    lam2, lam4 = spectral_multipliers(g)
    assert lam2[0] == 0.0 and lam4[0] == 0.0
    # Nyquist mode: cos(pi) = -1
    assert np.isclose(lam2[-1], -4.0 / 0.25)
    assert np.isclose(lam4[-1], 16.0 / 0.0625)
    assert np.allclose(lam4, lam2 * lam2)


@pytest.mark.parametrize("n,dx", [(32, 1.0), (33, 1.0), (64, 0.25)])
def test_spectral_matches_stencil(n, dx):
    rng = np.random.default_rng(7)
    g = Grid1D(n, dx)
    f = FieldState(g, rng.standard_normal(n))
    lam2, lam4 = spectral_multipliers(g)
    lap_spec = np.fft.irfft(np.fft.rfft(f.values) * lam2, n)
    bih_spec = np.fft.irfft(np.fft.rfft(f.values) * lam4, n)
    scale = np.max(np.abs(laplacian(f).values))
    assert np.max(np.abs(lap_spec - laplacian(f).values)) < 1e-12 * scale
    scale4 = np.max(np.abs(biharmonic(f).values))
    assert np.max(np.abs(bih_spec - biharmonic(f).values)) < 1e-12 * scale4


def test_spatial_mean():
    g = Grid1D(16)
    assert spatial_mean(FieldState(g, np.full(16, 2.5))) == 2.5
    sine = FieldState(g, np.sin(2 * np.pi * np.arange(16) / 16))
    assert abs(spatial_mean(sine)) < 1e-12
    vals = np.zeros(16)
    vals[:4] = [1, 2, 3, 4]
    assert spatial_mean(FieldState(Grid1D(8), np.array([1, 2, 3, 4, 1, 2, 3, 4]))) == 2.5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), shift=st.integers(-40, 40))
def test_operators_commute_with_translations(seed, shift):
    f = random_field(40, seed)
    for op in (laplacian, biharmonic, gradient):
        shifted_first = op(FieldState(f.grid, np.roll(f.values, shift)))
        shifted_after = np.roll(op(f).values, shift)
        assert np.array_equal(shifted_first.values, shifted_after)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_laplacian_mean_vanishes(seed):
    f = random_field(56, seed, amp=10.0)
    lap = laplacian(f)
    assert abs(spatial_mean(lap)) < 1e-12 * max(1.0, np.max(np.abs(lap.values)))
