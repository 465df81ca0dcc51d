"""Roughness, structure factors, two-time correlators, and phase observables.

All estimators reduce per realization first (inside ensemble workers) and
then average over realizations with exact summation, so standard errors are
realization-to-realization and results are order-insensitive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .equations import EquationSpec
from .grid import FieldState, Grid1D
from .integrate import RunSpec, mean_stderr, run_ensemble_map
from .oracles import mode_rates, mode_wavenumbers

__all__ = [
    "RoughnessSeries",
    "CorrelatorSeries",
    "roughness",
    "roughness_values",
    "measure_roughness",
    "structure_factor",
    "parseval_roughness_sq",
    "two_time_correlator",
    "mode_amplitudes_map",
    "collect_mode_amplitudes",
    "height_difference_correlation",
    "phase_correlator",
    "return_probability",
    "collect_fields",
    "equilibration_time",
]


@dataclass
class RoughnessSeries:
    """Ensemble roughness W(t) for one system size."""

    system_size: int
    times: np.ndarray
    w_mean: np.ndarray
    w_stderr: np.ndarray
    n_realizations: int = 1

    def __post_init__(self):
        if not (len(self.times) == len(self.w_mean) == len(self.w_stderr)):
            raise ValueError("times, w_mean, w_stderr must have equal length")
        if np.any(np.asarray(self.w_mean) < 0):
            raise ValueError("w_mean must be non-negative")


@dataclass
class CorrelatorSeries:
    """A correlator against k, x, or t, with per-point standard errors."""

    kind: str
    abscissa: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.abscissa) == len(self.values) == len(self.stderr)):
            raise ValueError("abscissa, values, stderr must have equal length")


def roughness_values(values: np.ndarray) -> np.ndarray:
    """RMS deviation from the spatial mean, along the last axis."""
    dev = values - values.mean(axis=-1, keepdims=True)
    return np.sqrt(np.mean(dev * dev, axis=-1))


def roughness(f: FieldState) -> float:
    """Root-mean-square deviation of the field from its spatial average."""
    return float(roughness_values(f.values))


def _w_and_w2_map(times, fields):
    w = roughness_values(fields)
    return np.column_stack([w, w * w])


def measure_roughness(run: RunSpec, workers: int = 1):
    """Ensemble W(t) and W(t)^2 in one pass.

    Returns ``(RoughnessSeries, w2_mean, w2_stderr)``; the squared series is
    what the exact linear oracle predicts.
    """
    times, stacked = run_ensemble_map(run, _w_and_w2_map, workers)
    mean, err = mean_stderr(stacked)
    series = RoughnessSeries(
        system_size=run.grid.n_sites,
        times=times,
        w_mean=mean[:, 0],
        w_stderr=err[:, 0],
        n_realizations=run.n_realizations,
    )
    return series, mean[:, 1], err[:, 1]


# --- spectral observables -------------------------------------------------


def structure_factor(snapshots: np.ndarray, grid: Grid1D) -> CorrelatorSeries:
    """S(k) = dx |F(k)|^2 / n per nonzero rfft mode, averaged over snapshots.

    Continuum normalization: the Riemann sum ``(1/L) sum_k S(k)`` over the
    full spectrum (conjugate pairs counted twice, Nyquist once for even n)
    equals W^2 exactly; see :func:`parseval_roughness_sq`.
    """
    snapshots = np.atleast_2d(snapshots)
    fk = np.fft.rfft(snapshots, axis=-1)
    s_all = grid.dx * (fk.real**2 + fk.imag**2) / grid.n_sites
    mean, err = mean_stderr(s_all[:, 1:])
    return CorrelatorSeries(
        kind="structure_factor",
        abscissa=mode_wavenumbers(grid)[1:],
        values=mean,
        stderr=err,
        meta={"n_snapshots": snapshots.shape[0]},
    )


def parseval_roughness_sq(values: np.ndarray, grid: Grid1D) -> tuple[float, float]:
    """W^2 computed in real space and from the spectrum, for one snapshot."""
    w2_real = float(roughness_values(values) ** 2)
    fk = np.fft.rfft(values)
    s = grid.dx * (fk.real**2 + fk.imag**2) / grid.n_sites
    weights = np.full(len(s), 2.0)
    weights[0] = 0.0  # mean mode excluded by the W definition
    if grid.n_sites % 2 == 0:
        weights[-1] = 1.0
    w2_spec = float(np.sum(weights * s) / grid.length)
    return w2_real, w2_spec


def mode_amplitudes_map(times, fields, modes):
    """Per-trajectory rfft amplitudes at selected modes; shape (T, len(modes))."""
    return np.fft.rfft(fields, axis=-1)[:, list(modes)]


def collect_mode_amplitudes(run: RunSpec, modes, workers: int = 1):
    """Stacked complex mode amplitudes, shape (R, T, len(modes))."""
    return run_ensemble_map(run, partial(mode_amplitudes_map, modes=tuple(modes)), workers)


def equilibration_time(eq: EquationSpec, grid: Grid1D, multiplier: float = 3.0) -> float:
    """Steady-state onset heuristic: ``multiplier`` relaxation times of the
    slowest nonzero mode of the variant's linear theory (scales as L^z)."""
    rates = mode_rates(eq, grid)[1:]
    slowest = float(np.min(rates[rates > 0])) if np.any(rates > 0) else np.inf
    return multiplier / slowest if np.isfinite(slowest) else np.inf


def _autocorrelation(a: np.ndarray) -> np.ndarray:
    """Mean over time origins of a(t+l) conj(a(t)) for one complex series."""
    t_len = len(a)
    fa = np.fft.fft(a, 2 * t_len)
    raw = np.fft.ifft(fa * np.conj(fa))[:t_len]
    return raw / (t_len - np.arange(t_len))


def two_time_correlator(
    times: np.ndarray,
    mode_stack: np.ndarray,
    t0_index: int,
    modes,
    grid: Grid1D,
    eq: EquationSpec | None = None,
    stationary_start: bool = False,
    average_origins: bool = False,
) -> list[CorrelatorSeries]:
    """Normalized C(k, t) = <a_k(t0+t) conj(a_k(t0))> / <|a_k(t0)|^2> per mode.

    ``mode_stack`` has shape (R, T, M) as returned by
    :func:`collect_mode_amplitudes`.  C(k, 0) = 1 exactly by construction.
    Warns when t0 precedes the equilibration heuristic unless the run is
    declared to start in the stationary state.

    ``average_origins=True`` additionally averages over all time origins
    after ``t0`` (valid for stationary records with a uniform schedule; the
    estimator targets the same C(k, t) with far smaller variance).
    """
    if eq is not None and not stationary_start:
        t_equil = equilibration_time(eq, grid)
        if times[t0_index] < t_equil:
            warnings.warn(
                f"two-time origin t0={times[t0_index]:g} precedes the "
                f"equilibration heuristic {t_equil:g}",
                stacklevel=2,
            )
    lags = times[t0_index:] - times[t0_index]
    k = mode_wavenumbers(grid)
    out = []
    for j, m in enumerate(modes):
        if average_origins:
            spacings = np.diff(times[t0_index:])
            if len(spacings) and not np.allclose(spacings, spacings[0], rtol=1e-6):
                raise ValueError("origin averaging needs a uniform record schedule")
            per_real = np.stack(
                [_autocorrelation(mode_stack[r, t0_index:, j]).real for r in range(mode_stack.shape[0])]
            )
        else:
            a0 = mode_stack[:, t0_index, j]
            per_real = (mode_stack[:, t0_index:, j] * np.conj(a0)[:, None]).real
        num_mean, num_err = mean_stderr(per_real)
        denom = float(np.mean(per_real[:, 0]))
        out.append(
            CorrelatorSeries(
                kind="two_time_k",
                abscissa=lags,
                values=num_mean / denom,
                stderr=num_err / denom,
                meta={"mode": int(m), "k": float(k[m])},
            )
        )
    return out


# --- real-space correlators ------------------------------------------------


def _differences_sq(snapshots: np.ndarray, separations) -> np.ndarray:
    """Mean over reference sites of (f(r+x) - f(r))^2, per snapshot row."""
    out = np.empty((snapshots.shape[0], len(separations)))
    for i, x in enumerate(separations):
        d = np.roll(snapshots, -int(x), axis=-1) - snapshots
        out[:, i] = np.mean(d * d, axis=-1)
    return out


def height_difference_correlation(
    snapshots: np.ndarray, separations, dx: float = 1.0
) -> CorrelatorSeries:
    """G(x) = <(f(r+x) - f(r))^2> over reference sites and realizations.

    ``snapshots`` has shape (R, n); separations are in sites.  G(0) = 0
    exactly.
    """
    snapshots = np.atleast_2d(snapshots)
    per_real = _differences_sq(snapshots, separations)
    mean, err = mean_stderr(per_real)
    return CorrelatorSeries(
        kind="height_difference",
        abscissa=np.asarray(separations, dtype=float) * dx,
        values=mean,
        stderr=err,
    )


def phase_correlator(snapshots: np.ndarray, separations, dx: float = 1.0) -> CorrelatorSeries:
    """<cos(f(r+x) - f(r))> over reference sites and realizations; 1 at x=0."""
    snapshots = np.atleast_2d(snapshots)
    out = np.empty((snapshots.shape[0], len(separations)))
    for i, x in enumerate(separations):
        d = np.roll(snapshots, -int(x), axis=-1) - snapshots
        out[:, i] = np.mean(np.cos(d), axis=-1)
    mean, err = mean_stderr(out)
    return CorrelatorSeries(
        kind="phase",
        abscissa=np.asarray(separations, dtype=float) * dx,
        values=mean,
        stderr=err,
    )


def _equal_position_map(times, fields, t0_index):
    base = fields[t0_index]
    return np.mean(fields[t0_index:] * base, axis=-1)


def return_probability(
    times: np.ndarray,
    fields_stack: np.ndarray,
    t0_index: int,
    eq: EquationSpec | None = None,
    grid: Grid1D | None = None,
    stationary_start: bool = False,
) -> CorrelatorSeries:
    """Equal-position two-time correlator <f(r, t0+t) f(r, t0)>.

    Averaged over sites and realizations; at t = 0 this is the steady-state
    site variance.  ``fields_stack`` has shape (R, T, n).
    """
    if eq is not None and grid is not None and not stationary_start:
        t_equil = equilibration_time(eq, grid)
        if times[t0_index] < t_equil:
            warnings.warn(
                f"return-probability origin t0={times[t0_index]:g} precedes "
                f"the equilibration heuristic {t_equil:g}",
                stacklevel=2,
            )
    per_real = np.stack(
        [_equal_position_map(times, fields_stack[r], t0_index) for r in range(fields_stack.shape[0])]
    )
    mean, err = mean_stderr(per_real)
    return CorrelatorSeries(
        kind="return_probability",
        abscissa=times[t0_index:] - times[t0_index],
        values=mean,
        stderr=err,
    )


def _identity_map(times, fields):
    return fields


def collect_fields(run: RunSpec, workers: int = 1):
    """All snapshots of all realizations, shape (R, T, n)."""
    return run_ensemble_map(run, _identity_map, workers)
