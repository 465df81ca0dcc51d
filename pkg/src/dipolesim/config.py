"""Declarative experiment configuration: strict schema, overrides, provenance.

A config file is YAML or JSON with the sections below (all keys optional
unless noted; unknown keys are rejected with path-qualified messages):

    grid:        sizes (list of site counts) or n_sites, dx
    equation:    variant (required), d2, d4, g, C
    integrator:  scheme, dt, t_max, record {kind, ...}
    initial:     kind (zero | gaussian_random), amplitude
    ensemble:    n_realizations, master_seed, block_size
    observables: optional correlator requests (structure_factor,
                 height_difference, phase, two_time, return_probability)
    analysis:    collapse {window, chi_bounds, z_bounds, grid_step, pinned},
                 growth_window, equilibration_multiplier
    output:      directory, formats

Command-line overrides use dotted paths (``--set equation.g=0.25``); values
are parsed as YAML scalars.  The fully resolved config (defaults filled) is
echoed into every output file, and rerunning a resolved config with the
same master seed reproduces every numeric column byte-identically.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import yaml

from .equations import EquationSpec, make_equation
from .grid import Grid1D
from .integrate import InitialCondition, IntegratorSpec, RunSpec, geometric_times

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "apply_overrides", "parse_config"]


class ConfigError(ValueError):
    """Schema violation, reported with the offending key path."""


_DEFAULTS = {
    "grid": {"sizes": [64], "dx": 1.0},
    # curvature_cap: null selects the bare (singular) quadratic nonlinearity
    "equation": {"variant": None, "d2": None, "d4": None, "g": None, "C": None, "curvature_cap": None},
    "integrator": {
        "scheme": "imex_spectral",
        "dt": 0.05,
        "t_max": 100.0,
        "record": {"kind": "geometric", "t_min": 0.5, "points_per_decade": 8},
    },
    "initial": {"kind": "zero", "amplitude": 1.0},
    "ensemble": {"n_realizations": 16, "master_seed": 2024, "block_size": 128},
    "observables": {
        "structure_factor": None,
        "height_difference": None,
        "phase": None,
        "two_time": None,
        "return_probability": None,
    },
    "analysis": {
        "collapse": {
            "window": [None, None],
            "chi_bounds": [0.0, 3.0],
            "z_bounds": [0.5, 4.0],
            "grid_step": 0.1,
            "pinned": [],
        },
        "growth_window": None,
        "equilibration_multiplier": 3.0,
    },
    "output": {"directory": "out", "formats": ["csv", "json"]},
}

_RECORD_KEYS = {
    "geometric": {"kind", "t_min", "points_per_decade"},
    "linear": {"kind", "t_start", "t_end", "n_points"},
    "explicit": {"kind", "times"},
}

_OBSERVABLE_KEYS = {
    "structure_factor": {"time"},
    "height_difference": {"separations", "time", "n_snapshots"},
    "phase": {"separations", "time", "n_snapshots"},
    "two_time": {"modes", "t0"},
    "return_probability": {"t0"},
}


def _require_mapping(obj, path):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(obj).__name__}")


def _check_keys(obj, allowed, path):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown key")


def _merge_section(defaults, given, path, nested=()):
    _require_mapping(given, path)
    _check_keys(given, defaults, path)
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key in nested and isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge_section(out[key], val, f"{path}.{key}")
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class ExperimentConfig:
    """A fully resolved experiment description."""

    resolved: dict = dc_field(default_factory=dict)

    @property
    def sizes(self) -> list[int]:
        return list(self.resolved["grid"]["sizes"])

    def equation(self) -> EquationSpec:
        eq = self.resolved["equation"]
        coeffs = {}
        if eq["d2"] is not None:
            coeffs["d2"] = float(eq["d2"])
        if eq["d4"] is not None:
            coeffs["d4"] = float(eq["d4"])
        if eq["g"] is not None:
            coeffs["g"] = float(eq["g"])
        if eq["C"] is not None:
            coeffs["noise_strength"] = float(eq["C"])
        if eq["curvature_cap"] is not None:
            coeffs["curvature_cap"] = float(eq["curvature_cap"])
        return make_equation(eq["variant"], **coeffs)

    def record_times(self) -> tuple[float, ...]:
        integ = self.resolved["integrator"]
        rec = integ["record"]
        t_max = float(integ["t_max"])
        kind = rec["kind"]
        if kind == "geometric":
            return geometric_times(float(rec["t_min"]), t_max, int(rec["points_per_decade"]))
        if kind == "linear":
            import numpy as np

            return tuple(
                np.linspace(float(rec["t_start"]), float(rec["t_end"]), int(rec["n_points"]))
            )
        return tuple(float(t) for t in rec["times"])

    def integrator(self) -> IntegratorSpec:
        integ = self.resolved["integrator"]
        return IntegratorSpec(
            scheme=integ["scheme"],
            dt=float(integ["dt"]),
            t_max=float(integ["t_max"]),
            record_times=self.record_times(),
        )

    def initial(self) -> InitialCondition:
        init = self.resolved["initial"]
        return InitialCondition(kind=init["kind"], amplitude=float(init["amplitude"]))

    def run_spec(self, n_sites: int) -> RunSpec:
        ens = self.resolved["ensemble"]
        return RunSpec(
            grid=Grid1D(n_sites=int(n_sites), dx=float(self.resolved["grid"]["dx"])),
            equation=self.equation(),
            integrator=self.integrator(),
            master_seed=int(ens["master_seed"]),
            n_realizations=int(ens["n_realizations"]),
            initial_condition=self.initial(),
            block_size=int(ens["block_size"]),
        )

    def run_specs(self) -> list[tuple[int, RunSpec]]:
        return [(n, self.run_spec(n)) for n in self.sizes]

    def canonical_json(self) -> str:
        return json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))


def parse_config(document: dict) -> ExperimentConfig:
    """Validate a raw mapping against the schema and fill defaults."""
    _require_mapping(document, "config")
    _check_keys(document, _DEFAULTS, "config")
    resolved = {}
    for section, defaults in _DEFAULTS.items():
        given = document.get(section, {})
        if section == "integrator":
            resolved[section] = _merge_section(defaults, given, section, nested=())
            rec = resolved[section]["record"]
            _require_mapping(rec, "integrator.record")
            kind = rec.get("kind", "geometric")
            if kind not in _RECORD_KEYS:
                raise ConfigError(
                    f"integrator.record.kind: unknown kind {kind!r}; "
                    f"expected one of {sorted(_RECORD_KEYS)}"
                )
            _check_keys(rec, _RECORD_KEYS[kind], "integrator.record")
            if kind == "geometric":
                base = dict(_DEFAULTS["integrator"]["record"])
                base.update(rec)
                resolved[section]["record"] = base
        elif section == "observables":
            resolved[section] = _merge_section(defaults, given, section)
            for name, req in resolved[section].items():
                if req is None:
                    continue
                _require_mapping(req, f"observables.{name}")
                _check_keys(req, _OBSERVABLE_KEYS[name], f"observables.{name}")
        elif section == "analysis":
            resolved[section] = _merge_section(defaults, given, section, nested=("collapse",))
        else:
            resolved[section] = _merge_section(defaults, given, section)

    grid = resolved["grid"]
    if "n_sites" in (document.get("grid") or {}):
        raise ConfigError("grid.n_sites: unknown key")  # guarded by _check_keys anyway
    if not isinstance(grid["sizes"], list) or not grid["sizes"]:
        raise ConfigError("grid.sizes: expected a non-empty list of site counts")
    if resolved["equation"]["variant"] is None:
        raise ConfigError("equation.variant: required")

    cfg = ExperimentConfig(resolved)
    try:  # surface invalid values early, path-qualified
        cfg.equation()
    except ValueError as exc:
        raise ConfigError(f"equation: {exc}") from exc
    try:
        cfg.integrator()
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc
    try:
        cfg.initial()
    except ValueError as exc:
        raise ConfigError(f"initial: {exc}") from exc
    return cfg


def apply_overrides(document: dict, overrides: list[str]) -> dict:
    """Apply ``path.to.key=value`` overrides; values parse as YAML scalars."""
    doc = copy.deepcopy(document)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {item!r}: unparseable value ({exc})") from exc
        node = doc
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r}: {key} is not a mapping")
        node[keys[-1]] = value
    return doc


def load_config(path, overrides: list[str] | None = None) -> ExperimentConfig:
    """Load and validate a YAML/JSON config file, with optional overrides."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    if p.suffix.lower() == ".json":
        document = json.loads(text)
    else:
        document = yaml.safe_load(text)
    if document is None:
        document = {}
    if overrides:
        document = apply_overrides(document, overrides)
    return parse_config(document)
