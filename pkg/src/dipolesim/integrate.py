"""Stochastic time stepping: explicit Euler-Maruyama and semi-implicit spectral.

Reproducibility contract
------------------------
Every trajectory is a pure function of ``(master_seed, realization_index)``.
Per-realization streams are PCG64 generators seeded with a splitmix64 mix of
the master seed and the index (see :func:`derive_seed`), so any subset of
realizations can be recomputed independently and results cannot depend on
execution order or worker count.

Trajectories are advanced in fixed-size blocks: a block of realizations is
stepped as one ``(block, n_sites)`` array.  All element-wise operations and
the (i)rfft kernels act row-independently and bit-identically to single-row
evaluation, and noise is drawn from each realization's own stream, so block
stepping reproduces per-trajectory stepping exactly.  The block size is a
constant of the run spec (never derived from the worker count).

Ensemble reductions use ``math.fsum``, which is exactly rounded and hence
insensitive to summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from multiprocessing import get_context
from typing import Callable, Sequence

import numpy as np

from .equations import (
    EquationSpec,
    linear_multipliers,
    noise_values,
    nonlinear_values,
    rhs_values,
    stability_limit,
)
from .grid import FieldState, Grid1D

__all__ = [
    "SCHEMES",
    "OVERFLOW_GUARD",
    "IntegratorSpec",
    "InitialCondition",
    "RunSpec",
    "TrajectoryRecord",
    "EnsembleSeries",
    "DivergenceError",
    "derive_seed",
    "realization_rng",
    "step",
    "run_trajectory",
    "run_ensemble",
    "run_ensemble_map",
    "mean_stderr",
    "geometric_times",
]

SCHEMES = ("explicit_euler_maruyama", "imex_spectral")

# |field| beyond this is declared a divergence rather than propagating
# overflow into non-finite values
OVERFLOW_GUARD = 1e12

_NOISE_CHUNK = 64  # steps of noise drawn per stream at a time
_CHECK_INTERVAL = 64  # steps between overflow checks


@dataclass(frozen=True)
class IntegratorSpec:
    """Scheme, step size, horizon, and observation times."""

    scheme: str
    dt: float
    t_max: float
    record_times: tuple[float, ...]

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        times = tuple(float(t) for t in self.record_times)
        if not times:
            raise ValueError("record_times must be non-empty")
        if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("record_times must be non-decreasing")
        if times[0] < 0 or times[-1] > self.t_max + 0.5 * self.dt:
            raise ValueError("record_times must lie within [0, t_max]")
        object.__setattr__(self, "record_times", times)

    def record_steps(self) -> np.ndarray:
        """Record times snapped to step indices (unique, ascending)."""
        steps = np.unique(np.rint(np.asarray(self.record_times) / self.dt).astype(np.int64))
        return steps


@dataclass(frozen=True)
class InitialCondition:
    """``zero`` or ``gaussian_random`` start.

    ``gaussian_random`` fills the lattice with i.i.d. normal values of the
    given amplitude and removes the spatial mean (the conserved dynamics and
    the roughness function are insensitive to the mean mode, and the charge
    variants require it absent).
    """

    kind: str = "zero"
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "gaussian_random"):
            raise ValueError(f"unknown initial condition {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to reproduce an ensemble bit-exactly."""

    grid: Grid1D
    equation: EquationSpec
    integrator: IntegratorSpec
    master_seed: int
    n_realizations: int
    initial_condition: InitialCondition = InitialCondition("zero")
    block_size: int = 128

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass
class TrajectoryRecord:
    """Snapshots of one realization at the requested record times."""

    times: np.ndarray
    fields: np.ndarray  # shape (n_times, n_sites)


@dataclass
class EnsembleSeries:
    """Per-time ensemble mean and standard error of a scalar observable."""

    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_realizations: int


class DivergenceError(RuntimeError):
    """Raised when a trajectory exceeds the overflow guard.

    ``divergences`` lists ``(realization_index, time)`` pairs for every
    realization that blew up.
    """

    def __init__(self, divergences: list[tuple[int, float]]):
        self.divergences = list(divergences)
        pairs = ", ".join(f"realization {i} at t={t:g}" for i, t in self.divergences)
        super().__init__(f"field exceeded overflow guard {OVERFLOW_GUARD:g}: {pairs}")


def derive_seed(master_seed: int, realization_index: int) -> int:
    """64-bit per-realization seed via the splitmix64 avalanche mixer.

    ``x = master_seed + (index + 1) * 0x9E3779B97F4A7C15`` followed by the
    splitmix64 finalizer.  Stated so alternate implementations can
    reproduce the streams.
    """
    mask = (1 << 64) - 1
    x = (master_seed + (realization_index + 1) * 0x9E3779B97F4A7C15) & mask
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & mask
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & mask
    x ^= x >> 31
    return x


def realization_rng(master_seed: int, realization_index: int) -> np.random.Generator:
    """The RNG stream owned by one realization."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, realization_index)))


def _imex_denominator(eq: EquationSpec, grid: Grid1D, dt: float) -> np.ndarray:
    return 1.0 / (1.0 - dt * linear_multipliers(eq, grid))


def _check_explicit_stability(eq: EquationSpec, grid: Grid1D, integ: IntegratorSpec):
    if integ.scheme == "explicit_euler_maruyama":
        limit = stability_limit(eq, grid)
        if integ.dt > limit:
            raise ValueError(
                f"explicit dt={integ.dt} exceeds stability limit {limit:g}"
            )


def step(
    state: FieldState,
    eq: EquationSpec,
    integrator: IntegratorSpec,
    rng: np.random.Generator,
) -> FieldState:
    """Advance a single field by one time step.

    Explicit Euler-Maruyama: ``f += dt * (rhs(f) + xi)``.  Semi-implicit
    spectral: the nonlinear drift and noise are added explicitly, then the
    linear part is absorbed per Fourier mode through the backward-Euler
    denominator ``1 / (1 - dt * lambda(k))``.  On a pure eigenmode with
    g = 0, C = 0 the two schemes multiply the amplitude by
    ``1 + dt*lambda`` and ``1/(1 - dt*lambda)`` respectively, both ->
    ``exp(dt*lambda)`` as dt -> 0.
    """
    grid, dt = state.grid, integrator.dt
    _check_explicit_stability(eq, grid, integrator)
    n, dx = grid.n_sites, grid.dx
    if eq.noise_strength > 0:
        xi = noise_values(rng, eq, n, dx, dt)
    else:
        xi = None
    if integrator.scheme == "explicit_euler_maruyama":
        drift = rhs_values(eq, state.values, dx)
        if xi is not None:
            drift = drift + xi
        new = state.values + dt * drift
    else:
        u = nonlinear_values(eq, state.values, dx)
        if xi is not None:
            u = u + xi
        u = state.values + dt * u
        denom = _imex_denominator(eq, grid, dt)
        new = np.fft.irfft(np.fft.rfft(u) * denom, n)
    peak = np.max(np.abs(new))
    if not np.isfinite(peak) or peak > OVERFLOW_GUARD:
        raise DivergenceError([(0, state.time + dt)])
    return FieldState(grid, new, state.time + dt)


def _run_block(
    run: RunSpec, indices: Sequence[int]
) -> tuple[np.ndarray, np.ndarray, list[tuple[int, float]]]:
    """Advance a block of realizations; returns (times, fields, divergences).

    ``fields`` has shape ``(len(indices), n_records, n_sites)``.  Rows are
    fully independent: noise comes from per-realization streams and every
    array operation acts row-wise, so the output for realization i is
    identical no matter which block it is computed in.
    """
    grid, eq, integ = run.grid, run.equation, run.integrator
    _check_explicit_stability(eq, grid, integ)
    n, dx, dt = grid.n_sites, grid.dx, integ.dt
    nb = len(indices)
    steps = integ.record_steps()
    n_steps = int(steps[-1])
    record_set = {int(s): k for k, s in enumerate(steps)}
    times = steps * dt

    rngs = [realization_rng(run.master_seed, i) for i in indices]
    f = np.zeros((nb, n))
    if run.initial_condition.kind == "gaussian_random":
        amp = run.initial_condition.amplitude
        for r, rng in enumerate(rngs):
            z = rng.standard_normal(n)
            f[r] = amp * (z - np.mean(z))

    out = np.empty((nb, len(steps), n))
    if 0 in record_set:
        out[:, record_set[0], :] = f

    raw = np.empty((nb, _NOISE_CHUNK, n)) if eq.noise_strength > 0 else None
    diverged: dict[int, float] = {}

    # overflow beyond the guard is detected and reported; silence the
    # intermediate FP warnings it causes between checks
    with np.errstate(over="ignore", invalid="ignore"):
        _advance_block(
            run, indices, f, rngs, raw, out, record_set, n_steps, diverged
        )
    return times, out, sorted(diverged.items())


def _advance_block(run, indices, f, rngs, raw, out, record_set, n_steps, diverged):
    grid, eq, integ = run.grid, run.equation, run.integrator
    n, dx, dt = grid.n_sites, grid.dx, integ.dt
    noisy = eq.noise_strength > 0
    scale = math.sqrt(eq.noise_strength / (dx * dt)) if noisy else 0.0
    order = eq.noise_conservation_order
    imex = integ.scheme == "imex_spectral"
    denom = _imex_denominator(eq, grid, dt) if imex else None

    for s in range(1, n_steps + 1):
        j = (s - 1) % _NOISE_CHUNK
        if noisy and j == 0:
            chunk = min(_NOISE_CHUNK, n_steps - (s - 1))
            for r, rng in enumerate(rngs):
                raw[r, :chunk] = rng.standard_normal((chunk, n))
        if noisy:
            xi = raw[:, j, :] * scale
            if order == 1:
                xi = (np.roll(xi, -1, axis=-1) - np.roll(xi, 1, axis=-1)) / (2.0 * dx)
            elif order == 2:
                xi = (np.roll(xi, -1, axis=-1) + np.roll(xi, 1, axis=-1) - 2.0 * xi) / (dx * dx)
        if imex:
            u = nonlinear_values(eq, f, dx)
            if noisy:
                u = u + xi
            u = f + dt * u
            f = np.fft.irfft(np.fft.rfft(u, axis=-1) * denom, n, axis=-1)
        else:
            drift = rhs_values(eq, f, dx)
            if noisy:
                drift = drift + xi
            f = f + dt * drift
        record_idx = record_set.get(s)
        if record_idx is not None:
            out[:, record_idx, :] = f
        if record_idx is not None or s % _CHECK_INTERVAL == 0 or s == n_steps:
            peak = np.abs(f).max(axis=-1)
            bad = ~np.isfinite(peak) | (peak > OVERFLOW_GUARD)
            if bad.any():
                for r in np.flatnonzero(bad):
                    diverged.setdefault(int(indices[r]), s * dt)
                    f[r] = 0.0  # freeze the row; its records are void


def run_trajectory(run: RunSpec, realization_index: int) -> TrajectoryRecord:
    """Snapshots of one realization at the run's record times.

    Deterministic in ``(master_seed, realization_index)``; raises
    :class:`DivergenceError` with the offending time on overflow.
    """
    times, fields, diverged = _run_block(run, [realization_index])
    if diverged:
        raise DivergenceError(diverged)
    return TrajectoryRecord(times, fields[0])


def _block_worker(args):
    run, indices, traj_map = args
    times, fields, diverged = _run_block(run, indices)
    # diverged rows carry overflow-scale records up to their freeze point;
    # their mapped values are discarded when the error is raised
    with np.errstate(over="ignore", invalid="ignore"):
        mapped = [traj_map(times, fields[r]) for r in range(len(indices))]
    return times, mapped, diverged


def run_ensemble_map(
    run: RunSpec,
    traj_map: Callable[[np.ndarray, np.ndarray], np.ndarray],
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``traj_map(times, fields)`` to every realization.

    Returns ``(times, stacked)`` where ``stacked[i]`` is the map output for
    realization i.  ``traj_map`` must be picklable (module-level function or
    ``functools.partial`` of one) when ``workers > 1``.  Output is
    independent of ``workers``.
    """
    blocks = [
        list(range(lo, min(lo + run.block_size, run.n_realizations)))
        for lo in range(0, run.n_realizations, run.block_size)
    ]
    tasks = [(run, idx, traj_map) for idx in blocks]
    if workers > 1 and len(blocks) > 1:
        with get_context("fork").Pool(processes=workers) as pool:
            results = pool.map(_block_worker, tasks)
    else:
        results = []
        for t in tasks:
            res = _block_worker(t)
            if res[2]:  # fail fast on a diverged block when sequential
                raise DivergenceError(sorted(res[2]))
            results.append(res)
    times = results[0][0]
    mapped: list[np.ndarray] = []
    diverged: list[tuple[int, float]] = []
    for _, block_mapped, block_div in results:
        mapped.extend(block_mapped)
        diverged.extend(block_div)
    if diverged:
        raise DivergenceError(sorted(diverged))
    return times, np.stack(mapped)


def mean_stderr(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean and standard error over axis 0, via exact summation.

    ``math.fsum`` is exactly rounded, so the result does not depend on the
    order realizations were computed in.  With a single realization the
    standard error is reported as zero.
    """
    stack = np.asarray(stack, dtype=np.float64)
    n = stack.shape[0]
    flat = stack.reshape(n, -1)
    mean = np.empty(flat.shape[1])
    err = np.zeros(flat.shape[1])
    for j in range(flat.shape[1]):
        col = flat[:, j]
        m = math.fsum(col) / n
        mean[j] = m
        if n > 1:
            var = math.fsum((col - m) ** 2) / (n - 1)
            err[j] = math.sqrt(var / n)
    return mean.reshape(stack.shape[1:]), err.reshape(stack.shape[1:])


def _snapshot_map(times, fields, reducer):
    return np.array([reducer(fields[k]) for k in range(fields.shape[0])])


def run_ensemble(
    run: RunSpec,
    reducer: Callable[[np.ndarray], float],
    workers: int = 1,
) -> EnsembleSeries:
    """Ensemble statistics of a per-snapshot scalar reducer.

    ``reducer`` receives the field values of one snapshot and returns a
    float (e.g. the roughness).  Realizations are independent; the mean and
    standard error over them are order-insensitive.
    """
    from functools import partial

    times, stacked = run_ensemble_map(run, partial(_snapshot_map, reducer=reducer), workers)
    mean, err = mean_stderr(stacked)
    return EnsembleSeries(times, mean, err, run.n_realizations)


def geometric_times(t_min: float, t_max: float, points_per_decade: int) -> tuple[float, ...]:
    """Geometrically spaced observation times (inclusive of both ends)."""
    if not (0 < t_min < t_max):
        raise ValueError("need 0 < t_min < t_max")
    n = max(2, int(math.ceil(points_per_decade * math.log10(t_max / t_min))) + 1)
    return tuple(np.geomspace(t_min, t_max, n))
