"""Declarative experiment configs (TOML).

The grammar is deliberately flat: a top-level ``kind`` and ``preset``,
then the tables [triplet], [mc], [numeric], [params], [output] holding
scalars and arrays only. Functions are always named presets with numeric
parameters; nothing is parsed or evaluated at runtime.
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENT_KINDS = (
    "duality",
    "product-formula",
    "fubini",
    "derivative-check",
    "monotone-drift",
    "local-monotone",
    "wronskian",
    "density",
    "moment-bound",
    "truncation",
)

NUMERIC_DEFAULTS = {
    "grid_size": 64,
    "ode_mesh": 2048,
    "quad_tol": 1e-9,
    "fd_epsilon": 1e-5,
    "criterion_tol": 1e-12,
    "z_max": 3.0,
    "truncation_eps": 0.05,
}

MC_DEFAULTS = {
    "n_paths": 10000,
    "base_seed": 42,
    "chunk_size": 32768,
}


class ConfigError(ValueError):
    """Invalid configuration; the message carries the offending field path."""


@dataclass
class ExperimentConfig:
    kind: str
    preset: str = ""
    triplet: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)
    numeric: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def mc_value(self, key: str):
        return self.mc.get(key, MC_DEFAULTS[key])

    def numeric_value(self, key: str):
        return self.numeric.get(key, NUMERIC_DEFAULTS[key])


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def validate_config(cfg: ExperimentConfig) -> None:
    _require(cfg.kind in EXPERIMENT_KINDS, "kind",
             f"unknown experiment kind {cfg.kind!r}; "
             f"expected one of {', '.join(EXPERIMENT_KINDS)}")
    for key, default in MC_DEFAULTS.items():
        value = cfg.mc.get(key, default)
        _require(isinstance(value, int) and not isinstance(value, bool),
                 f"mc.{key}", "must be an integer")
        if key != "base_seed":
            _require(value > 0, f"mc.{key}", "must be positive")
        else:
            _require(value >= 0, f"mc.{key}", "must be nonnegative")
    for key in cfg.mc:
        _require(key in MC_DEFAULTS, f"mc.{key}", "unknown key")
    for key, value in cfg.numeric.items():
        _require(key in NUMERIC_DEFAULTS, f"numeric.{key}", "unknown key")
        _require(isinstance(value, (int, float)) and not isinstance(value, bool),
                 f"numeric.{key}", "must be a number")
        _require(value > 0, f"numeric.{key}", "must be positive")
    fmt = cfg.output.get("format", "json")
    _require(fmt in ("json", "csv"), "output.format",
             f"must be 'json' or 'csv', got {fmt!r}")
    if "path" in cfg.output:
        _require(isinstance(cfg.output["path"], str), "output.path",
                 "must be a string")
    if cfg.triplet:
        for key in cfg.triplet:
            _require(key in ("measure", "gamma", "sigma", "T", "measure_params"),
                     f"triplet.{key}", "unknown key")
        if "T" in cfg.triplet:
            _require(cfg.triplet["T"] > 0, "triplet.T", "must be positive")
        if "sigma" in cfg.triplet:
            _require(cfg.triplet["sigma"] >= 0, "triplet.sigma",
                     "must be nonnegative")


def config_from_dict(raw: dict) -> ExperimentConfig:
    known = {"kind", "preset", "triplet", "mc", "numeric", "params", "output"}
    for key in raw:
        _require(key in known, key, "unknown top-level key")
    _require("kind" in raw, "kind", "is required")
    cfg = ExperimentConfig(
        kind=raw["kind"],
        preset=raw.get("preset", ""),
        triplet=dict(raw.get("triplet", {})),
        mc=dict(raw.get("mc", {})),
        numeric=dict(raw.get("numeric", {})),
        params=dict(raw.get("params", {})),
        output=dict(raw.get("output", {})),
    )
    validate_config(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config syntax: {exc}") from exc
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# writer (restricted TOML subset: scalars and arrays of scalars)

def _toml_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise ConfigError(f"cannot serialize {type(value).__name__} to the config "
                      "grammar")


def _toml_value(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    return _toml_scalar(value)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = [f"kind = {_toml_scalar(cfg.kind)}"]
    if cfg.preset:
        lines.append(f"preset = {_toml_scalar(cfg.preset)}")
    for section in ("triplet", "mc", "numeric", "params", "output"):
        table = getattr(cfg, section)
        if not table:
            continue
        nested = {k: v for k, v in table.items() if isinstance(v, dict)}
        flat = {k: v for k, v in table.items() if not isinstance(v, dict)}
        lines.append("")
        lines.append(f"[{section}]")
        for key, value in flat.items():
            lines.append(f"{key} = {_toml_value(value)}")
        for sub, subtable in nested.items():
            lines.append("")
            lines.append(f"[{section}.{sub}]")
            for key, value in subtable.items():
                lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def save_config(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))


def config_as_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
