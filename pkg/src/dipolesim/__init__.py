"""Simulator and analysis toolkit for dissipative dipole-conserving dynamics.

Subpackages:

* :mod:`dipolesim.grid`        -- periodic lattice and discrete operators
* :mod:`dipolesim.equations`   -- Langevin equation registry, noise, tilt identity
* :mod:`dipolesim.integrate`   -- explicit / semi-implicit stepping, ensembles
* :mod:`dipolesim.observables` -- roughness, structure factors, correlators
* :mod:`dipolesim.oracles`     -- exact linear-theory reference formulas
* :mod:`dipolesim.scaling`     -- power-law fits and finite-size data collapse
* :mod:`dipolesim.lindblad`    -- exact two-species spin-chain benchmarks
* :mod:`dipolesim.config`      -- declarative experiment configs
* :mod:`dipolesim.runner`      -- orchestration and machine-readable output
* :mod:`dipolesim.cli`         -- the ``dipolesim`` command
"""

__version__ = "0.1.0"

from .equations import EquationSpec, make_equation
from .grid import FieldState, Grid1D
from .integrate import InitialCondition, IntegratorSpec, RunSpec, run_ensemble, run_trajectory
from .observables import CorrelatorSeries, RoughnessSeries, roughness
from .scaling import CollapseResult, PowerLawFit, collapse_residual, fit_power_law, optimize_collapse

__all__ = [
    "__version__",
    "EquationSpec",
    "make_equation",
    "FieldState",
    "Grid1D",
    "InitialCondition",
    "IntegratorSpec",
    "RunSpec",
    "run_ensemble",
    "run_trajectory",
    "CorrelatorSeries",
    "RoughnessSeries",
    "roughness",
    "CollapseResult",
    "PowerLawFit",
    "collapse_residual",
    "fit_power_law",
    "optimize_collapse",
]
