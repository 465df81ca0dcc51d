"""Registry of Langevin equations and their deterministic/stochastic pieces.

The central nonlinear equation (variant ``dipole_growth``) is

    dt alpha = d2 * lap(alpha) - d4 * bih(alpha) + g * lap(alpha)**2 + xi,

with Gaussian white noise <xi(x,t) xi(x',t')> = C delta(x-x') delta(t-t').
Its linear siblings share the same operators:

* ``dipole_deterministic`` -- same drift, C = 0 (noise-free coarsening runs)
* ``edwards_wilkinson``    -- d2 * lap + white noise
* ``mullins_herring``      -- -d4 * bih + white noise
* ``kpz_reference``        -- nonlinearity g * grad(alpha)**2 instead
                              (optional calibration entry)
* ``weak_charge``          -- d2 * lap, noise conserved to first order
                              (divergence of a white field)
* ``strong_charge``        -- -d4 * bih, noise conserved to second order
                              (Laplacian of a white field)

Noise discretization is Ito: the per-step increment added to the field is
``dt * sample_noise(...)`` where the base white field has per-site values
``sqrt(C / (dx * dt)) * N(0, 1)``, so ``Var(xi_i * dt) = C * dt / dx``.

Curvature floor
---------------
The bare quadratic nonlinearity makes the continuum equation singular:
regions of negative curvature u = lap(alpha) are anti-diffusive (the flux
d2_eff = -2 g u), and unlike a Cahn-Hilliard flux u**2 has no stabilizing
branch for u -> -inf, so deep dips self-sharpen and |u| diverges at a
finite time (the blow-up time converges under space-time refinement).  The
scaling state itself lives at O(1) curvature, so production runs clamp the
curvature entering the nonlinearity from below at ``curvature_cap``
(default 4/g for the dipole variants).  The clamp is inactive for fields
with lap(alpha) > -cap, leaving every small-field identity (tilt, linear
modes, stencil contracts) exact, and the measured scaling exponents are
insensitive to the cap value.  ``curvature_cap=None`` selects the bare
equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import (
    FieldState,
    Grid1D,
    biharmonic_values,
    gradient_values,
    laplacian_values,
    spectral_multipliers,
)

__all__ = [
    "VARIANTS",
    "EquationSpec",
    "make_equation",
    "rhs_deterministic",
    "rhs_values",
    "nonlinear_values",
    "linear_multipliers",
    "sample_noise",
    "noise_values",
    "stability_limit",
    "tilt_transform",
    "tilt_drift",
    "tilt_residual",
    "tilt_cancellation_residual",
]

# variant -> spatial conservation order of the noise (0: white, 1: gradient
# of white, 2: Laplacian of white)
NOISE_CONSERVATION_ORDER = {
    "dipole_growth": 0,
    "dipole_deterministic": 0,
    "edwards_wilkinson": 0,
    "mullins_herring": 0,
    "kpz_reference": 0,
    "weak_charge": 1,
    "strong_charge": 2,
}

VARIANTS = tuple(NOISE_CONSERVATION_ORDER)

# variants whose drift is d2*lap - d4*bih + g*lap(.)^2
_GROWTH_VARIANTS = frozenset(
    {"dipole_growth", "dipole_deterministic", "edwards_wilkinson", "mullins_herring"}
)


@dataclass(frozen=True)
class EquationSpec:
    """Coefficients of one registry entry.

    ``d2`` multiplies the Laplacian, ``d4`` the (negated) biharmonic, ``g``
    the quadratic nonlinearity, and ``noise_strength`` is the white-noise
    intensity C.  ``noise_conservation_order`` is fixed by the variant.
    """

    variant: str
    d2: float = 0.0
    d4: float = 0.0
    g: float = 0.0
    noise_strength: float = 0.0
    noise_conservation_order: int = -1  # -1: fill from variant
    curvature_cap: float | None = None

    def __post_init__(self):
        if self.variant not in NOISE_CONSERVATION_ORDER:
            raise ValueError(
                f"unknown variant {self.variant!r}; expected one of {sorted(VARIANTS)}"
            )
        if self.curvature_cap is not None and not self.curvature_cap > 0:
            raise ValueError(f"curvature_cap must be positive or None, got {self.curvature_cap}")
        expected = NOISE_CONSERVATION_ORDER[self.variant]
        if self.noise_conservation_order == -1:
            object.__setattr__(self, "noise_conservation_order", expected)
        elif self.noise_conservation_order != expected:
            raise ValueError(
                f"variant {self.variant!r} requires noise_conservation_order "
                f"{expected}, got {self.noise_conservation_order}"
            )
        if self.d4 < 0:
            raise ValueError(f"d4 must be >= 0, got {self.d4}")
        if self.noise_strength < 0:
            raise ValueError(f"noise_strength must be >= 0, got {self.noise_strength}")
        if self.variant == "dipole_deterministic" and self.noise_strength != 0:
            raise ValueError("dipole_deterministic requires noise_strength = 0")


def make_equation(variant: str, **coeffs) -> EquationSpec:
    """Build an :class:`EquationSpec` from per-variant defaults.

    The ``dipole_growth`` defaults are the headline simulation parameters
    (g = 0.5, d2 = 0, d4 = 1, C = 1); the linear calibration variants
    default to unit coefficients.
    """
    defaults = {
        "dipole_growth": dict(d2=0.0, d4=1.0, g=0.5, noise_strength=1.0),
        "dipole_deterministic": dict(d2=0.0, d4=1.0, g=0.5, noise_strength=0.0),
        "edwards_wilkinson": dict(d2=1.0, d4=0.0, g=0.0, noise_strength=1.0),
        "mullins_herring": dict(d2=0.0, d4=1.0, g=0.0, noise_strength=1.0),
        "kpz_reference": dict(d2=1.0, d4=0.0, g=1.0, noise_strength=1.0),
        "weak_charge": dict(d2=1.0, d4=0.0, g=0.0, noise_strength=1.0),
        "strong_charge": dict(d2=0.0, d4=1.0, g=0.0, noise_strength=1.0),
    }
    if variant not in defaults:
        raise ValueError(f"unknown variant {variant!r}")
    params = defaults[variant] | coeffs
    return EquationSpec(variant=variant, **params)


def nonlinear_values(eq: EquationSpec, values: np.ndarray, dx: float) -> np.ndarray:
    """Nonlinear drift contribution; zero array for the linear variants.

    With a curvature floor set, the curvature entering the square is clamped
    from below at ``-curvature_cap`` (exact for fields above the floor).
    """
    if eq.g != 0.0 and eq.variant in _GROWTH_VARIANTS:
        lap = laplacian_values(values, dx)
        if eq.curvature_cap is not None:
            lap = np.maximum(lap, -eq.curvature_cap)
        return eq.g * lap * lap
    if eq.g != 0.0 and eq.variant == "kpz_reference":
        grad = gradient_values(values, dx)
        return eq.g * grad * grad
    return np.zeros_like(values)


def rhs_values(eq: EquationSpec, values: np.ndarray, dx: float) -> np.ndarray:
    """Deterministic drift evaluated with the real-space stencils."""
    if eq.variant in _GROWTH_VARIANTS or eq.variant == "kpz_reference":
        out = nonlinear_values(eq, values, dx)
        if eq.d2 != 0.0:
            out += eq.d2 * laplacian_values(values, dx)
        if eq.d4 != 0.0:
            out -= eq.d4 * biharmonic_values(values, dx)
        return out
    if eq.variant == "weak_charge":
        return eq.d2 * laplacian_values(values, dx)
    if eq.variant == "strong_charge":
        return -eq.d4 * biharmonic_values(values, dx)
    raise AssertionError(f"unhandled variant {eq.variant!r}")


def rhs_deterministic(eq: EquationSpec, f: FieldState) -> FieldState:
    """Deterministic part of the Langevin equation as a field."""
    return FieldState(f.grid, rhs_values(eq, f.values, f.grid.dx), f.time)


def linear_multipliers(eq: EquationSpec, grid: Grid1D) -> np.ndarray:
    """Per-rfft-mode eigenvalue of the linear drift (for semi-implicit steps)."""
    lam2, lam4 = spectral_multipliers(grid)
    if eq.variant == "weak_charge":
        return eq.d2 * lam2
    if eq.variant == "strong_charge":
        return -eq.d4 * lam4
    return eq.d2 * lam2 - eq.d4 * lam4


def noise_values(
    rng: np.random.Generator, eq: EquationSpec, n_sites: int, dx: float, dt: float
) -> np.ndarray:
    """One noise field draw (before the dt factor applied by the stepper).

    Base white field: eta_i = sqrt(C / (dx dt)) N(0, 1), i.i.d. per site.
    Conservation order 1 returns the centered first difference of eta over
    dx; order 2 returns its lattice Laplacian.  Both annihilate the spatial
    mean exactly.  C = 0 returns zeros without consuming the stream.
    """
    if eq.noise_strength == 0.0:
        return np.zeros(n_sites)
    eta = rng.standard_normal(n_sites)
    eta *= math.sqrt(eq.noise_strength / (dx * dt))
    order = eq.noise_conservation_order
    if order == 0:
        return eta
    if order == 1:
        return gradient_values(eta, dx)
    if order == 2:
        return laplacian_values(eta, dx)
    raise AssertionError(f"unhandled conservation order {order}")


def sample_noise(
    rng: np.random.Generator, eq: EquationSpec, grid: Grid1D, dt: float
) -> FieldState:
    """Noise increment field; multiply by dt in the explicit update."""
    return FieldState(grid, noise_values(rng, eq, grid.n_sites, grid.dx, dt))


def stability_limit(eq: EquationSpec, grid: Grid1D) -> float:
    """Largest explicit-Euler dt stable for the linear terms.

    The extreme stencil eigenvalues are |lam2| <= 4/dx^2 and lam4 <= 16/dx^4,
    giving dt <= dx^2 / (2 |d2|) and dt <= dx^4 / (8 d4).  Returns ``inf``
    when both linear terms vanish.
    """
    dx = grid.dx
    bounds = []
    if eq.d2 != 0.0:
        bounds.append(dx * dx / (2.0 * abs(eq.d2)))
    if eq.d4 != 0.0:
        bounds.append(dx ** 4 / (8.0 * eq.d4))
    return min(bounds) if bounds else math.inf


# --- tilt transformation -------------------------------------------------
#
# Adding the quadratic profile (c0/2) x^2 shifts the Laplacian coefficient:
# if f solves the equation with coefficient d2, then f + (c0/2) x^2 solves
# the equation with d2' = d2 - 2 g c0 up to the uniform drift
# d2' c0 + g c0^2.  The identity is exact for the discrete stencils on the
# interior of an open window (central differences are exact on quadratics),
# which is what tilt_residual checks.  Choosing c0 = d2 / (2 g) cancels the
# Laplacian term entirely -- possible only when g != 0, which is what the
# cancellation control probes.


def tilt_transform(
    f: FieldState, c0: float, eq: EquationSpec
) -> tuple[FieldState, EquationSpec]:
    """Apply the quadratic tilt and return the shifted equation.

    Only valid on open windows (x = i dx with no periodic identification);
    production periodic grids are rejected because the added profile is not
    periodic.
    """
    if f.grid.periodic:
        raise ValueError("tilt_transform requires an open (non-periodic) window grid")
    x = f.grid.sites()
    shifted = FieldState(f.grid, f.values + 0.5 * c0 * x * x, f.time)
    return shifted, replace(eq, d2=eq.d2 - 2.0 * eq.g * c0)


def tilt_drift(eq_shifted: EquationSpec, c0: float) -> float:
    """Uniform drift constant of the exact discrete tilt identity."""
    return eq_shifted.d2 * c0 + eq_shifted.g * c0 * c0


def _interior(n_sites: int) -> slice:
    # drift terms have stencil footprint +-2; skip wrapped edge points
    return slice(2, n_sites - 2)


def tilt_residual(eq: EquationSpec, f: FieldState, c0: float) -> float:
    """Max interior deviation of the exact tilt identity.

    Evaluates ``rhs(shifted eq, tilted f) - rhs(eq, f) - drift`` on window
    points at distance >= 2 from the edges, where the periodic wrap of the
    stencils does not reach.  Zero (to round-off) for every (d2, g, c0).
    """
    tilted, shifted_eq = tilt_transform(f, c0, eq)
    lhs = rhs_values(shifted_eq, tilted.values, f.grid.dx)
    rhs = rhs_values(eq, f.values, f.grid.dx)
    sl = _interior(f.grid.n_sites)
    return float(np.max(np.abs(lhs[sl] - rhs[sl] - tilt_drift(shifted_eq, c0))))


def tilt_cancellation_residual(eq: EquationSpec, f: FieldState, c0: float) -> float:
    """Residual of forcing the tilted field into the d2' = 0 frame.

    Uses the drift ``g c0**2`` of the target frame.  Vanishes exactly when
    c0 = d2 / (2 g) (requires g != 0); stays at O(d2) for g = 0, d2 != 0,
    which is the negative control: the Laplacian coefficient cannot be
    removed by tilting a non-interacting equation.
    """
    if f.grid.periodic:
        raise ValueError("tilt residuals require an open (non-periodic) window grid")
    x = f.grid.sites()
    tilted = f.values + 0.5 * c0 * x * x
    target_eq = replace(eq, d2=0.0)
    lhs = rhs_values(target_eq, tilted, f.grid.dx)
    rhs = rhs_values(eq, f.values, f.grid.dx)
    sl = _interior(f.grid.n_sites)
    return float(np.max(np.abs(lhs[sl] - rhs[sl] - eq.g * c0 * c0)))
