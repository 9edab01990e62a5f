"""Run configuration: nested dataclasses read from and written to YAML.

Schema (version "1"); every section is optional and defaults are shown by
``vqc-bsde init``:

    schema_version: "1"
    problem:  family (black_scholes | hjb | constant), dim, horizon,
              rate, vol, spot, strike, option_type (call | put)   # black_scholes
              lam                                                 # hjb
              constant_value                                      # constant
    model:    arch (mlp | vqc), hidden, n_qubits, n_layers,
              adapter_seed (null = derived from the run seed),
              decoder_variance (null = 1/dim)
    solver:   num_paths, batch_size, epochs, learning_rate, num_steps, seed,
              y0_init_halfwidth, y0_scale, shuffle
    oracle:   mc_samples, seed
    sweep:    strikes, option_types, lambdas, repetitions, base_seed
    output_dir, workers

Unknown keys, wrong types and a mismatched schema version raise ConfigError.
"""
from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .solver import SolverConfig

SCHEMA_VERSION = "1"
FAMILIES = ("black_scholes", "hjb", "constant")
ARCHS = ("mlp", "vqc")
OPTION_TYPES = ("call", "put")

DEFAULT_STRIKES = (70.0, 80.0, 90.0, 100.0, 110.0, 120.0, 130.0, 140.0)
DEFAULT_LAMBDAS = tuple(float(v) for v in [*range(1, 21), 30, 40, 50, 60])


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemConfig:
    family: str = "black_scholes"
    dim: int = 100
    horizon: float = 1.0
    rate: float = 0.1
    vol: float = 0.2
    spot: float = 100.0
    strike: float = 100.0
    option_type: str = "call"
    lam: float = 1.0
    constant_value: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"problem.family must be one of {FAMILIES}, got '{self.family}'")
        if self.option_type not in OPTION_TYPES:
            raise ConfigError(f"problem.option_type must be one of {OPTION_TYPES}")
        if self.dim < 1 or not self.horizon > 0:
            raise ConfigError("problem.dim must be >= 1 and problem.horizon > 0")


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "vqc"
    hidden: tuple[int, ...] = (64, 64, 64, 64)
    n_qubits: int = 4
    n_layers: int = 2
    adapter_seed: int | None = None
    decoder_variance: float | None = None

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"model.arch must be one of {ARCHS}, got '{self.arch}'")
        if self.n_qubits < 1 or self.n_layers < 1 or any(h < 1 for h in self.hidden):
            raise ConfigError("model sizes must be positive")


@dataclass(frozen=True)
class OracleConfig:
    mc_samples: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 1 or self.seed < 0:
            raise ConfigError("oracle.mc_samples must be >= 1 and oracle.seed >= 0")


@dataclass(frozen=True)
class SweepConfig:
    strikes: tuple[float, ...] = DEFAULT_STRIKES
    option_types: tuple[str, ...] = OPTION_TYPES
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    repetitions: int = 5
    base_seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("sweep.repetitions must be >= 1")
        if not set(self.option_types) <= set(OPTION_TYPES):
            raise ConfigError(f"sweep.option_types must be drawn from {OPTION_TYPES}")
        if self.base_seed < 0:
            raise ConfigError("sweep.base_seed must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    schema_version: str = SCHEMA_VERSION
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output_dir: str = "runs"
    workers: int = 1

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be '{SCHEMA_VERSION}', "
                              f"got '{self.schema_version}'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _coerce(value, hint, where: str):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        options = typing.get_args(hint)
        if value is None and type(None) in options:
            return None
        (inner,) = [o for o in options if o is not type(None)]
        return _coerce(value, inner, where)
    if dataclasses.is_dataclass(hint):
        return from_dict(hint, value, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        inner = typing.get_args(hint)[0]
        return tuple(_coerce(v, inner, f"{where}[{i}]") for i, v in enumerate(value))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    raise ConfigError(f"{where}: unsupported field type {hint}")


def from_dict(cls, data, where: str = "config"):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {k: _coerce(v, hints[k], f"{where}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def to_dict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value):
            value = to_dict(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def load_config(path) -> RunConfig:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if "schema_version" not in (data or {}):
        raise ConfigError("config: missing required key 'schema_version'")
    return from_dict(RunConfig, data)


def dump_config(config: RunConfig) -> str:
    header = "# vqc-bsde run configuration (schema version %s)\n" % SCHEMA_VERSION
    return header + yaml.safe_dump(to_dict(config), sort_keys=False, default_flow_style=None)
