"""Run configuration: a single JSON document validated against a fixed schema.

All rates are angular frequencies in rad/s, times in seconds. Probe power is
given either as ``K0`` (normalized power at Omega = 0) or as a sweep of
multiples of the frequency-dependent SQL power ``sqrt(gamma_m^2 + Omega^2)``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

import jsonschema

from .model import SystemParams, bose_occupation
from .spectra import StrategySpec

TWO_PI = 2 * math.pi

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

STRATEGY_SCHEMA = {
    "oneOf": [
        {"type": "string", "enum": ["raw_minus_amplitude", "combined_amplitude", "phase_plus",
                                    "combined_phase", "sideband_corrupted", "sideband_filtered"]},
        {"type": "object", "additionalProperties": False, "required": ["kind", "varphi"],
         "properties": {"kind": {"const": "generalized_pair"}, "varphi": _NUM}},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dichromatic run configuration (rates in rad/s, times in s)",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "params": {
            "type": "object",
            "additionalProperties": False,
            "description": "System parameters. Defaults: gamma=2pi*1e4, gamma_m=2pi*1e2, omega_m=2pi*1e6, eta=1.",
            "properties": {
                "gamma": {**_POS, "description": "optical half-linewidth, rad/s"},
                "gamma_m": {**_NONNEG, "description": "mechanical half-linewidth, rad/s"},
                "omega_m": {**_POS, "description": "mechanical eigenfrequency, rad/s"},
                "eta": {**_NONNEG, "description": "opto-mechanical coupling, 1/s"},
                "n_T": {**_NONNEG, "description": "thermal occupation"},
                "temperature": {**_NONNEG, "description": "bath temperature in K; sets n_T by Bose occupation"},
                "thermal_on": {"type": "boolean", "default": False},
                "omega0": _POS, "mass": _POS, "length": _POS,
            },
        },
        "power": {
            "type": "object",
            "additionalProperties": False,
            "description": "Probe power. Default: K_sweep_over_sql=[0.1, 0.3, 1, 3, 10].",
            "properties": {
                "K0": {**_POS, "description": "normalized probe power K(0), rad/s"},
                "K0_over_gamma_m": {**_POS, "description": "K(0) in units of gamma_m"},
                "K_sweep_over_sql": {"type": "array", "minItems": 1, "items": _POS,
                                     "description": "multiples of sqrt(gamma_m^2+Omega^2) per grid point"},
            },
            "maxProperties": 1,
        },
        "strategies": {"type": "array", "minItems": 1, "items": STRATEGY_SCHEMA,
                       "description": "default: raw_minus_amplitude, combined_amplitude"},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "description": "Frequency grid. Default: 201 linear points on [-20 gamma_m, 20 gamma_m].",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "kind": {"enum": ["linear", "log"]},
                "omega_min": _NUM, "omega_max": _NUM,
                "points": {"type": "array", "minItems": 1, "items": _NUM},
            },
        },
        "sidebands": {
            "type": "object",
            "additionalProperties": False,
            "description": "Default: enabled, approximate tilde-g, filter on.",
            "properties": {
                "enabled": {"type": "boolean"},
                "exact": {"type": "boolean"},
                "filter": {"type": "boolean"},
            },
        },
        "montecarlo": {
            "type": "object",
            "additionalProperties": False,
            "description": "Time-domain runs. Defaults: duration 2 s, K0 = 100 gamma_m, injection 10x threshold.",
            "properties": {
                "duration": _POS,
                "dt": _POS,
                "decimation": {"type": "integer", "minimum": 1},
                "segment_length": {"type": "integer", "minimum": 8},
                "include_sidebands": {"type": "boolean"},
                "strategies": {"type": "array", "minItems": 1, "items": {
                    "enum": ["raw_minus_amplitude", "combined_amplitude", "phase_plus", "combined_phase"]}},
                "force": {
                    "type": ["object", "null"],
                    "additionalProperties": False,
                    "properties": {
                        "f_s0": _NONNEG,
                        "f_s0_over_threshold": _NONNEG,
                        "psi_f": _NUM,
                        "tau": _POS,
                        "t_start": _NONNEG,
                    },
                },
            },
        },
        "steady": {
            "type": "object",
            "additionalProperties": False,
            "description": "Mean-field inputs. Pump amplitudes A_+-, in sqrt(photons/s).",
            "properties": {
                "A_plus": _NONNEG, "A_minus": _NONNEG,
                "paper_mode": {"type": "boolean"},
                "eta_e_over_eta": {"type": "array", "minItems": 1, "items": _POS},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string", "minLength": 1},
                "formats": {"type": "array", "items": {"enum": ["csv", "json", "svg"]}, "minItems": 1},
            },
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
    },
}

DEFAULTS = {
    "params": {"gamma": TWO_PI * 1e4, "gamma_m": TWO_PI * 1e2, "omega_m": TWO_PI * 1e6, "eta": 1.0,
               "n_T": 0.0, "thermal_on": False},
    "power": {"K_sweep_over_sql": [0.1, 0.3, 1.0, 3.0, 10.0]},
    "strategies": ["raw_minus_amplitude", "combined_amplitude"],
    "grid": {"n": 201, "kind": "linear"},
    "sidebands": {"enabled": True, "exact": False, "filter": True},
    "montecarlo": {"duration": 2.0, "include_sidebands": False,
                   "strategies": ["raw_minus_amplitude", "combined_amplitude"],
                   "force": {"f_s0_over_threshold": 10.0, "psi_f": -math.pi / 2, "tau": 0.05, "t_start": 1.0}},
    "steady": {"A_plus": 1e3, "A_minus": 1e3, "paper_mode": False, "eta_e_over_eta": [1.0, 0.01]},
    "output": {"dir": "out", "formats": ["csv"]},
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            # a power block replaces the default choice rather than merging into it
            out[key] = copy.deepcopy(value) if key == "power" else _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    raw: dict

    @property
    def params(self) -> SystemParams:
        p = dict(self.raw["params"])
        temperature = p.pop("temperature", None)
        if temperature is not None:
            p["n_T"] = bose_occupation(p["omega_m"], temperature)
        base = SystemParams(**p)
        power = self.raw["power"]
        if "K0" in power:
            return base.with_K0(power["K0"])
        if "K0_over_gamma_m" in power:
            return base.with_K0(power["K0_over_gamma_m"] * base.gamma_m)
        return base.with_K0(base.gamma_m)

    @property
    def k_sweep(self):
        return self.raw["power"].get("K_sweep_over_sql")

    @property
    def strategies(self) -> list[StrategySpec]:
        out = []
        for s in self.raw["strategies"]:
            out.append(StrategySpec(s["kind"], s["varphi"]) if isinstance(s, dict) else StrategySpec(s))
        return out

    @property
    def grid(self):
        import numpy as np

        from .spectra import frequency_grid
        g = self.raw["grid"]
        if "points" in g:
            return np.array(sorted(g["points"]), dtype=float)
        params = self.params
        span = 20 * params.gamma_m if params.gamma_m > 0 else 0.2 * params.gamma
        kind = g.get("kind", "linear")
        lo = g.get("omega_min", -span if kind == "linear" else None)
        hi = g.get("omega_max", span if kind == "linear" else None)
        return frequency_grid(params, g.get("n", 201), kind, lo, hi)

    @property
    def sidebands(self) -> dict:
        return self.raw["sidebands"]

    @property
    def montecarlo(self) -> dict:
        return self.raw["montecarlo"]

    @property
    def steady(self) -> dict:
        return self.raw["steady"]

    @property
    def output(self) -> dict:
        return self.raw["output"]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])


def validate_document(doc) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def build(doc: dict | None = None) -> RunConfig:
    """Validate ``doc`` and fill in defaults."""
    doc = {} if doc is None else doc
    validate_document(doc)
    merged = _merge(DEFAULTS, doc)
    validate_document(merged)
    cfg = RunConfig(merged)
    try:
        params = cfg.params
        grid = cfg.grid
        cfg.strategies
    except ValueError as exc:
        raise ConfigError(f"config error: {exc}") from None
    if len(grid) == 0:
        raise ConfigError("config error: empty frequency grid")
    if not all(map(math.isfinite, grid)):
        raise ConfigError("config error: non-finite grid point")
    if cfg.k_sweep is None and params.K0 <= 0:
        raise ConfigError("config error: probe power must be positive")
    return cfg


def load(path) -> RunConfig:
    """Read and validate a JSON config file. I/O problems surface as OSError."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return build(doc)


def schema_document() -> dict:
    """Schema with the documented defaults attached."""
    doc = copy.deepcopy(SCHEMA)
    doc["default"] = DEFAULTS
    return doc
