import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dipolesim.equations import (
    EquationSpec,
    make_equation,
    noise_values,
    rhs_deterministic,
    sample_noise,
    stability_limit,
    tilt_cancellation_residual,
    tilt_drift,
    tilt_residual,
    tilt_transform,
)
from dipolesim.grid import FieldState, Grid1D, spatial_mean, spectral_multipliers


def test_spec_validation():
    with pytest.raises(ValueError):
        EquationSpec("no_such_variant")
    with pytest.raises(ValueError):
        EquationSpec("dipole_growth", d4=-1.0)
    with pytest.raises(ValueError):
        EquationSpec("dipole_growth", noise_strength=-2.0)
    with pytest.raises(ValueError):
        EquationSpec("dipole_deterministic", noise_strength=1.0)
    with pytest.raises(ValueError):
        EquationSpec("weak_charge", noise_conservation_order=0)
    with pytest.raises(ValueError):
        EquationSpec("dipole_growth", curvature_cap=0.0)


def test_conservation_orders_fixed_by_variant():
    assert make_equation("dipole_growth").noise_conservation_order == 0
    assert make_equation("edwards_wilkinson").noise_conservation_order == 0
    assert make_equation("weak_charge").noise_conservation_order == 1
    assert make_equation("strong_charge").noise_conservation_order == 2


def test_headline_parameters_accepted_verbatim():
    eq = make_equation("dipole_growth", d2=0.0, d4=1.0, g=0.5, noise_strength=1.0)
    assert (eq.d2, eq.d4, eq.g, eq.noise_strength) == (0.0, 1.0, 0.5, 1.0)


def test_rhs_constant_field_is_zero():
    g = Grid1D(32)
    f = FieldState(g, np.full(32, 4.2))
    for variant in ("dipole_growth", "edwards_wilkinson", "mullins_herring",
                    "kpz_reference", "weak_charge", "strong_charge"):
        eq = make_equation(variant)
        assert np.allclose(rhs_deterministic(eq, f).values, 0.0, atol=1e-12)


def test_rhs_single_mode_composition():
    # dipole_growth with d2=0, d4=1, g=0.5 on a cosine mode:
    # rhs = -lam4 f + 0.5 (lam2 f)^2 pointwise
    n = 64
    g = Grid1D(n)
    lam2, lam4 = spectral_multipliers(g)
    m = 5
    f = FieldState(g, 1.3 * np.cos(2 * np.pi * m * g.sites() / n))
    eq = make_equation("dipole_growth", d2=0.0, d4=1.0, g=0.5)
    expected = -lam4[m] * f.values + 0.5 * (lam2[m] * f.values) ** 2
    assert np.allclose(rhs_deterministic(eq, f).values, expected, atol=1e-10)


def test_rhs_charge_variants_linear():
    rng = np.random.default_rng(3)
    g = Grid1D(48)
    f = FieldState(g, rng.standard_normal(48))
    from dipolesim.grid import biharmonic, laplacian

    weak = make_equation("weak_charge", d2=0.7)
    assert np.allclose(rhs_deterministic(weak, f).values, 0.7 * laplacian(f).values)
    strong = make_equation("strong_charge", d4=1.3)
    assert np.allclose(rhs_deterministic(strong, f).values, -1.3 * biharmonic(f).values)


def test_kpz_reference_gradient_nonlinearity():
    # the reference entry squares the centered gradient instead
    from dipolesim.grid import gradient

    rng = np.random.default_rng(9)
    g = Grid1D(32)
    f = FieldState(g, rng.standard_normal(32))
    eq = make_equation("kpz_reference", d2=1.0, g=2.0)
    from dipolesim.grid import laplacian

    expected = laplacian(f).values + 2.0 * gradient(f).values ** 2
    assert np.allclose(rhs_deterministic(eq, f).values, expected)


def test_curvature_cap_inactive_below_floor():
    rng = np.random.default_rng(5)
    g = Grid1D(64)
    f = FieldState(g, 0.5 * rng.standard_normal(64))
    bare = make_equation("dipole_growth")
    capped = make_equation("dipole_growth", curvature_cap=50.0)
    assert np.array_equal(rhs_deterministic(bare, f).values, rhs_deterministic(capped, f).values)


def test_curvature_cap_floors_negative_curvature():
    from dipolesim.equations import nonlinear_values
    from dipolesim.grid import laplacian_values

    g = Grid1D(16)
    vals = np.zeros(16)
    vals[8] = 100.0  # deep negative curvature at the spike site
    capped = make_equation("dipole_growth", curvature_cap=5.0)
    lap = laplacian_values(vals, 1.0)
    nl = nonlinear_values(capped, vals, 1.0)
    floored = lap < -5.0
    assert floored.any()
    assert np.allclose(nl[floored], capped.g * 25.0)
    bare = nonlinear_values(make_equation("dipole_growth"), vals, 1.0)
    assert np.array_equal(nl[~floored], bare[~floored])


def test_stability_limit_values():
    g = Grid1D(32, dx=1.0)
    assert stability_limit(make_equation("mullins_herring", d4=1.0), g) == 0.125
    assert stability_limit(make_equation("edwards_wilkinson", d2=1.0), g) == 0.5
    eq0 = make_equation("edwards_wilkinson", d2=0.0, noise_strength=1.0)
    assert math.isinf(stability_limit(eq0, g))


def test_noise_variance_and_mean():
    # C=1, dx=1, dt=0.01 -> per-site std 10 within 2% over 1e6 samples
    rng = np.random.default_rng(11)
    eq = make_equation("edwards_wilkinson")
    draws = 2_000
    n = 500
    samples = np.concatenate([noise_values(rng, eq, n, 1.0, 0.01) for _ in range(draws)])
    assert abs(samples.std() / 10.0 - 1.0) < 0.02
    assert abs(samples.mean()) < 0.05


def test_noise_zero_strength_draws_nothing():
    g = Grid1D(16)
    eq = make_equation("dipole_deterministic")
    rng = np.random.default_rng(0)
    before = rng.bit_generator.state["state"]["state"]
    xi = sample_noise(rng, eq, g, 0.1)
    assert np.all(xi.values == 0.0)
    assert rng.bit_generator.state["state"]["state"] == before


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), order_variant=st.sampled_from(["weak_charge", "strong_charge"]))
def test_conserved_noise_zero_mean(seed, order_variant):
    rng = np.random.default_rng(seed)
    eq = make_equation(order_variant)
    g = Grid1D(64)
    xi = sample_noise(rng, eq, g, 0.05)
    assert abs(spatial_mean(xi)) < 1e-12 * max(1.0, np.max(np.abs(xi.values)))


# --- tilt transformation ----------------------------------------------------


def open_window_field(n=256, seed=3):
    g = Grid1D(n, periodic=False)
    rng = np.random.default_rng(seed)
    return FieldState(g, rng.standard_normal(n))


def test_tilt_rejects_periodic_grids():
    f = FieldState(Grid1D(32), np.zeros(32))
    with pytest.raises(ValueError):
        tilt_transform(f, 1.0, make_equation("dipole_growth"))


def test_tilt_identity_on_spec():
    f = open_window_field()
    eq = make_equation("dipole_growth", d2=1.0, g=0.5, curvature_cap=None)
    tilted, shifted = tilt_transform(f, 0.5, eq)
    assert shifted.d2 == 1.0 - 2.0 * 0.5 * 0.5
    x = f.grid.sites()
    assert np.allclose(tilted.values - f.values, 0.25 * x * x)
    # c0 = 0 is the identity on both field and spec
    same, same_eq = tilt_transform(f, 0.0, eq)
    assert np.array_equal(same.values, f.values) and same_eq == eq


@pytest.mark.parametrize("d2", [0.0, 1.0])
@pytest.mark.parametrize("g", [0.25, 0.5])
@pytest.mark.parametrize("c0", [-1.0, -0.5, 0.5, 1.0])
def test_tilt_residual_vanishes(d2, g, c0):
    f = open_window_field()
    eq = make_equation("dipole_growth", d2=d2, d4=1.0, g=g, curvature_cap=None)
    assert tilt_residual(eq, f, c0) <= 1e-10


def test_tilt_drift_constant():
    # drift reduces to g c0^2 when the target frame has no Laplacian term
    eq = make_equation("dipole_growth", d2=1.0, g=0.5, curvature_cap=None)
    c0 = eq.d2 / (2 * eq.g)  # cancels d2
    _, shifted = tilt_transform(open_window_field(), c0, eq)
    assert shifted.d2 == pytest.approx(0.0)
    assert tilt_drift(shifted, c0) == pytest.approx(eq.g * c0 * c0)


def test_tilt_cancellation_control():
    # removing the Laplacian term by tilting requires g != 0
    f = open_window_field()
    interacting = make_equation("dipole_growth", d2=1.0, g=0.5, curvature_cap=None)
    assert tilt_cancellation_residual(interacting, f, 1.0) <= 1e-10
    noninteracting = make_equation("dipole_growth", d2=1.0, g=0.0, curvature_cap=None)
    assert tilt_cancellation_residual(noninteracting, f, 1.0) > 1e-3
