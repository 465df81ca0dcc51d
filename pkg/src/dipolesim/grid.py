"""1D periodic lattice, finite-difference operators, and their exact spectral multipliers.

All simulation variants share the same discrete operators:

* ``laplacian``  -- 3-point central stencil ``(f[i+1] - 2 f[i] + f[i-1]) / dx**2``
* ``biharmonic`` -- the Laplacian applied twice (5-point stencil)
* ``gradient``   -- centered difference ``(f[i+1] - f[i-1]) / (2 dx)``

Indices wrap periodically.  The stencils are circulant, so they are
diagonal in the discrete Fourier basis; ``spectral_multipliers`` returns
their exact eigenvalues, which is what makes the semi-implicit integrator
agree with the real-space stencils to round-off.

Array-level kernels (``laplacian_values`` etc.) operate on the last axis
and accept batched inputs of shape ``(..., n_sites)``; the ``FieldState``
wrappers implement the single-field operations used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid1D",
    "FieldState",
    "laplacian",
    "biharmonic",
    "gradient",
    "spatial_mean",
    "spectral_multipliers",
    "laplacian_values",
    "biharmonic_values",
    "gradient_values",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D lattice of ``n_sites`` points with spacing ``dx``.

    ``periodic=True`` (the production default) identifies site ``n_sites``
    with site 0; physical length is ``n_sites * dx``.  Open windows
    (``periodic=False``) exist only for stencil identities evaluated on
    interior points, e.g. the tilt-transformation residual.
    """

    n_sites: int
    dx: float = 1.0
    periodic: bool = True

    def __post_init__(self):
        if self.n_sites < 8:
            raise ValueError(f"n_sites must be >= 8, got {self.n_sites}")
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")

    @property
    def length(self) -> float:
        return self.n_sites * self.dx

    def sites(self) -> np.ndarray:
        """Coordinates x_i = i * dx, i = 0 .. n_sites-1."""
        return np.arange(self.n_sites) * self.dx


@dataclass
class FieldState:
    """A real scalar field on a :class:`Grid1D` at one instant of time."""

    grid: Grid1D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n_sites,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.grid.n_sites} sites)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def copy(self) -> "FieldState":
        return FieldState(self.grid, self.values.copy(), self.time)


def laplacian_values(values: np.ndarray, dx: float) -> np.ndarray:
    """Periodic 3-point Laplacian along the last axis."""
    out = np.roll(values, -1, axis=-1)
    out += np.roll(values, 1, axis=-1)
    out -= 2.0 * values
    out /= dx * dx
    return out


def biharmonic_values(values: np.ndarray, dx: float) -> np.ndarray:
    """Periodic 5-point biharmonic: the Laplacian stencil applied twice."""
    return laplacian_values(laplacian_values(values, dx), dx)


def gradient_values(values: np.ndarray, dx: float) -> np.ndarray:
    """Periodic centered first difference along the last axis."""
    out = np.roll(values, -1, axis=-1)
    out -= np.roll(values, 1, axis=-1)
    out /= 2.0 * dx
    return out


def laplacian(f: FieldState) -> FieldState:
    """Discrete Laplacian of a field; same grid and time."""
    return FieldState(f.grid, laplacian_values(f.values, f.grid.dx), f.time)


def biharmonic(f: FieldState) -> FieldState:
    """Discrete biharmonic of a field, exactly ``laplacian(laplacian(f))``."""
    return FieldState(f.grid, biharmonic_values(f.values, f.grid.dx), f.time)


def gradient(f: FieldState) -> FieldState:
    """Centered first derivative of a field."""
    return FieldState(f.grid, gradient_values(f.values, f.grid.dx), f.time)


def spatial_mean(f: FieldState) -> float:
    """Arithmetic mean of the field values."""
    return float(np.mean(f.values))


def spectral_multipliers(grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """Exact stencil eigenvalues per real-FFT mode.

    Returns ``(lam2, lam4)`` of length ``n_sites // 2 + 1``, aligned with
    ``numpy.fft.rfft`` output for modes ``k_m = 2 pi m / (n_sites dx)``:

        lam2(k) = -(2 / dx**2) (1 - cos(k dx))        (Laplacian)
        lam4(k) = lam2(k)**2                          (biharmonic)

    These are the eigenvalues of the circulant stencils above, so
    transform -> multiply -> inverse-transform reproduces the real-space
    operators to round-off.
    """
    n, dx = grid.n_sites, grid.dx
    k = 2.0 * np.pi * np.arange(n // 2 + 1) / (n * dx)
    lam2 = -(2.0 / (dx * dx)) * (1.0 - np.cos(k * dx))
    return lam2, lam2 * lam2
