#!/usr/bin/env python3
"""Charge-transport dichotomy: mode-decay z and return-probability slopes.

Weak conservation: diffusive (z = 2, return probability ~ t^-1/2).
Strong conservation: subdiffusive (z = 4, return probability ~ t^-1/4).
Runs start in the (near-)stationary state via a mean-removed white initial
condition with the stationary amplitude.
"""

import argparse

import numpy as np

from dipolesim.equations import make_equation
from dipolesim.grid import Grid1D
from dipolesim.integrate import InitialCondition, IntegratorSpec, RunSpec
from dipolesim.observables import (
    collect_fields,
    collect_mode_amplitudes,
    return_probability,
    two_time_correlator,
)
from dipolesim.oracles import mode_rates, mode_wavenumbers, stationary_init_amplitude
from dipolesim.scaling import fit_exponential_decay, fit_power_law

CASES = {
    "weak_charge": dict(
        two_time=dict(n=96, modes=(2, 3, 4, 5), burn=30.0, horizon=700.0, rec=1.5, dt=0.1, reals=256, seed=101),
        return_prob=dict(n=512, burn=30.0, horizon=80.0, rec=1.0, dt=0.1, reals=384, seed=102, window=(4.0, 60.0)),
        z_expect=2.0,
        slope_expect=-0.5,
    ),
    "strong_charge": dict(
        two_time=dict(n=128, modes=(5, 6, 7, 8), burn=10.0, horizon=3000.0, rec=2.5, dt=0.25, reals=384, seed=103),
        return_prob=dict(n=512, burn=10.0, horizon=420.0, rec=4.0, dt=0.25, reals=384, seed=104, window=(10.0, 400.0)),
        z_expect=4.0,
        slope_expect=-0.25,
    ),
}


def stationary_run(variant, n, seed, reals, burn, horizon, rec, dt):
    eq = make_equation(variant)
    grid = Grid1D(n)
    amp = stationary_init_amplitude(eq, grid)
    times = tuple(np.arange(burn, burn + horizon + 1e-9, rec))
    integ = IntegratorSpec("imex_spectral", dt, times[-1], times)
    return eq, grid, RunSpec(
        grid, eq, integ, master_seed=seed, n_realizations=reals,
        initial_condition=InitialCondition("gaussian_random", amp),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    for variant, case in CASES.items():
        tt = case["two_time"]
        eq, grid, run = stationary_run(
            variant, tt["n"], tt["seed"], tt["reals"], tt["burn"], tt["horizon"], tt["rec"], tt["dt"]
        )
        times, stack = collect_mode_amplitudes(run, tt["modes"], args.workers)
        series = two_time_correlator(
            times, stack, 0, tt["modes"], grid, eq, stationary_start=True, average_origins=True
        )
        exact = mode_rates(eq, grid)
        k = mode_wavenumbers(grid)
        rates, errs = [], []
        for cs in series:
            rate, err = fit_exponential_decay(cs.abscissa, cs.values, cs.stderr, floor=0.15)
            rates.append(rate)
            errs.append(err)
            m = cs.meta["mode"]
            print(f"{variant} mode {m}: rate {rate:.6f} (exact {exact[m]:.6f})")
        zfit = fit_power_law(k[list(tt["modes"])], rates, errs)
        print(f"{variant}: z = {zfit.exponent:.3f} +- {zfit.stderr:.3f} (expect {case['z_expect']})")

        rp_case = case["return_prob"]
        eq, grid, run = stationary_run(
            variant, rp_case["n"], rp_case["seed"], rp_case["reals"],
            rp_case["burn"], rp_case["horizon"], rp_case["rec"], rp_case["dt"],
        )
        times, fields = collect_fields(run, args.workers)
        rp = return_probability(times, fields, 0, stationary_start=True)
        fit = fit_power_law(rp.abscissa, rp.values, rp.stderr, window=rp_case["window"])
        print(
            f"{variant}: return-probability slope = {fit.exponent:.4f} +- {fit.stderr:.4f} "
            f"(expect {case['slope_expect']})"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
