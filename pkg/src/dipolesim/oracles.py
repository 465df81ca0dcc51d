"""Exact linear-theory reference values for the calibration variants.

Every formula here is a closed-form sum over lattice Fourier modes of the
Ornstein-Uhlenbeck dynamics that the linear variants (Edwards-Wilkinson,
Mullins-Herring, weak/strong charge) reduce to.  Nothing in this module
touches the time stepper, so these serve as independent oracles for the
simulation and as the reference curves of the ``calibrate`` command.

Mode conventions (unnormalized DFT ``F_m = sum_j f_j exp(-i k_m x_j)``,
``k_m = 2 pi m / (n dx)``):

* relaxation rate      a_m = -lambda_lin(k_m)  (from the stencil eigenvalues)
* noise power input    <|xi_m|^2> per unit time = (C n / dx) |kernel(k_m)|^2
  with kernel 1 (white), i sin(k dx)/dx (order 1), lambda2 (order 2)
* OU variance          Var_m(t) = input/(2a) (1 - exp(-2 a t)),  -> input*t
  for a = 0
* roughness            W^2(t) = (1/n^2) sum_{m != 0} Var_m(t)
* structure factor     S(k_m) = dx Var_m / n   (continuum convention, so
  the Riemann sum (1/L) sum_m S(k_m) equals W^2)
"""

from __future__ import annotations

import numpy as np

from .equations import EquationSpec, linear_multipliers
from .grid import Grid1D, spectral_multipliers

__all__ = [
    "mode_wavenumbers",
    "mode_rates",
    "mode_noise_input",
    "stationary_mode_variance",
    "linear_roughness_sq",
    "stationary_structure_factor",
    "stationary_site_variance",
    "return_probability_exact",
    "height_difference_exact",
    "stationary_init_amplitude",
]


def mode_wavenumbers(grid: Grid1D) -> np.ndarray:
    """k_m for the rfft mode layout, m = 0 .. n//2."""
    return 2.0 * np.pi * np.arange(grid.n_sites // 2 + 1) / (grid.n_sites * grid.dx)


def _full_weights(grid: Grid1D) -> np.ndarray:
    """Multiplicity of each rfft mode in the full spectrum (conjugate pairs)."""
    n = grid.n_sites
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def mode_rates(eq: EquationSpec, grid: Grid1D) -> np.ndarray:
    """Linear relaxation rate per rfft mode (positive for damped modes)."""
    return -linear_multipliers(eq, grid)


def mode_noise_input(eq: EquationSpec, grid: Grid1D) -> np.ndarray:
    """Noise power injected per unit time into each unnormalized DFT mode."""
    n, dx = grid.n_sites, grid.dx
    base = eq.noise_strength * n / dx
    order = eq.noise_conservation_order
    if order == 0:
        kernel_sq = np.ones(n // 2 + 1)
    elif order == 1:
        k = mode_wavenumbers(grid)
        kernel_sq = (np.sin(k * dx) / dx) ** 2
    elif order == 2:
        lam2, _ = spectral_multipliers(grid)
        kernel_sq = lam2 * lam2
    else:
        raise AssertionError(order)
    return base * kernel_sq


def _mode_variance(
    eq: EquationSpec, grid: Grid1D, t: float | None, scheme_dt: float | None = None
) -> np.ndarray:
    """OU variance per mode at time t from a zero start (t=None: stationary).

    ``scheme_dt`` applies the exact stationary correction of the
    semi-implicit scheme, whose per-mode update ``x' = (x + dt xi)/(1+a dt)``
    equilibrates at ``input/(2a) / (1 + a dt / 2)`` instead of the continuum
    value; relevant only for strongly damped (UV) modes with a dt = O(1).
    """
    a = mode_rates(eq, grid)
    inp = mode_noise_input(eq, grid)
    var = np.zeros_like(a)
    damped = a > 0
    stat = np.zeros_like(a)
    stat[damped] = inp[damped] / (2.0 * a[damped])
    if scheme_dt is not None:
        stat[damped] /= 1.0 + 0.5 * a[damped] * scheme_dt
    if t is None:
        # undamped driven modes have no stationary variance; they never
        # occur in the registry variants (conserved noise nulls them)
        return stat
    if scheme_dt is not None:
        # exact law of the discrete recursion x' = (x + dt xi) / (1 + a dt)
        steps = int(round(t / scheme_dt))
        b = 1.0 / (1.0 + a[damped] * scheme_dt)
        var[damped] = stat[damped] * (1.0 - b ** (2 * steps))
    else:
        var[damped] = stat[damped] * (1.0 - np.exp(-2.0 * a[damped] * t))
    var[~damped] = inp[~damped] * t
    return var


def stationary_mode_variance(
    eq: EquationSpec, grid: Grid1D, scheme_dt: float | None = None
) -> np.ndarray:
    return _mode_variance(eq, grid, None, scheme_dt)


def linear_roughness_sq(eq: EquationSpec, grid: Grid1D, times, scheme_dt=None) -> np.ndarray:
    """Exact ensemble-mean W^2(t) of a linear variant started from zero.

    With ``scheme_dt`` the mode variances follow the exact discrete law of
    the semi-implicit update at that step size (the simulated process is a
    discrete Ornstein-Uhlenbeck recursion); otherwise the continuum law.
    The two agree to O(rate * dt) per mode.
    """
    n = grid.n_sites
    w = _full_weights(grid)
    out = np.empty(len(times))
    for i, t in enumerate(times):
        var = _mode_variance(eq, grid, float(t), scheme_dt)
        out[i] = np.sum(w[1:] * var[1:]) / (n * n)
    return out


def stationary_structure_factor(eq: EquationSpec, grid: Grid1D) -> np.ndarray:
    """Stationary S(k_m) for m = 1 .. n//2 in the continuum convention."""
    var = stationary_mode_variance(eq, grid)
    return grid.dx * var[1:] / grid.n_sites


def stationary_site_variance(
    eq: EquationSpec, grid: Grid1D, scheme_dt: float | None = None
) -> float:
    """Stationary per-site variance (equals the t=0 return probability)."""
    n = grid.n_sites
    w = _full_weights(grid)
    var = stationary_mode_variance(eq, grid, scheme_dt)
    return float(np.sum(w[1:] * var[1:]) / (n * n))


def return_probability_exact(eq: EquationSpec, grid: Grid1D, lags) -> np.ndarray:
    """Stationary equal-position two-time correlator of a linear variant."""
    n = grid.n_sites
    w = _full_weights(grid)
    var = stationary_mode_variance(eq, grid)
    a = mode_rates(eq, grid)
    out = np.empty(len(lags))
    for i, t in enumerate(lags):
        out[i] = np.sum(w[1:] * var[1:] * np.exp(-a[1:] * float(t))) / (n * n)
    return out


def height_difference_exact(eq: EquationSpec, grid: Grid1D, separations) -> np.ndarray:
    """Stationary G(x) = <(f(r+x) - f(r))^2> of a linear variant."""
    n, dx = grid.n_sites, grid.dx
    w = _full_weights(grid)
    var = stationary_mode_variance(eq, grid)
    k = mode_wavenumbers(grid)
    out = np.empty(len(separations))
    for i, x in enumerate(separations):
        out[i] = 2.0 * np.sum(w[1:] * var[1:] * (1.0 - np.cos(k[1:] * float(x)))) / (n * n)
    return out


def stationary_init_amplitude(eq: EquationSpec, grid: Grid1D) -> float:
    """i.i.d. site amplitude whose spectrum matches the stationary law at small k.

    A mean-removed white field has flat mode variance ``amp^2 n``.  For the
    strong-charge variant the stationary spectrum is exactly flat, so
    ``amp = sqrt(C / (2 d4 dx))`` reproduces the steady state exactly; for
    the weak-charge variant the match is exact as k -> 0 and the UV surplus
    relaxes at O(1) rates, so a short burn-in suffices.
    """
    if eq.variant == "strong_charge":
        return float(np.sqrt(eq.noise_strength / (2.0 * eq.d4 * grid.dx)))
    if eq.variant == "weak_charge":
        return float(np.sqrt(eq.noise_strength / (2.0 * eq.d2 * grid.dx)))
    raise ValueError(f"no stationary amplitude rule for variant {eq.variant!r}")
