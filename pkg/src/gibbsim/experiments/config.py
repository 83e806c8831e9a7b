"""Declarative experiment descriptions, JSON (de)serialization, validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

KINDS = (
    "dos_histogram",
    "bath_ensemble",
    "beta_sweep",
    "zeno_probe",
    "chain2_sweep",
    "random_dm_distance",
    "correlation_sweep",
)

SWEEP_MODES = ("fix_system_and_interaction", "resample_interaction")

#: Hard cap on the joint system+bath qubit count for dense simulation.
HARD_QUBIT_CAP = 12


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int = 2
    k: int = 3
    beta: tuple[float, ...] = (2.0,)
    coupling: float = 0.05  # JSON key "lambda"
    c_interval: tuple[float, float] = (0.0, 0.5)
    samples: int = 100
    seed: int = 0
    sweep_mode: str = "resample_interaction"
    t_points: int = 60
    threads: int = 1
    out_dir: str = "out"
    dims: tuple[int, ...] = (4, 16)  # random_dm_distance
    m_bits: tuple[int, ...] = (4, 6, 8)  # chain2_sweep
    lambda2t: float = 0.5  # zeno_probe
    t_schedule: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)  # zeno_probe
    t_max: float = 2.0 * math.pi  # correlation_sweep
    kick: float = 0.05  # correlation_sweep

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.sweep_mode not in SWEEP_MODES:
            raise ConfigError(f"unknown sweep_mode {self.sweep_mode!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.n < 1 or self.k < 1:
            raise ConfigError("n and k must be >= 1")
        if self.n + self.k > HARD_QUBIT_CAP:
            raise ConfigError(f"n + k exceeds the hard cap of {HARD_QUBIT_CAP} qubits")
        if not (len(self.c_interval) == 2 and self.c_interval[0] < self.c_interval[1]):
            raise ConfigError("c_interval must be an increasing pair")
        if self.t_points < 2:
            raise ConfigError("t_points must be >= 2")
        if self.coupling < 0:
            raise ConfigError("lambda must be nonnegative")
        if any(b < 0 for b in self.beta) or not self.beta:
            raise ConfigError("beta list must be nonempty and nonnegative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("coupling")
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "ExperimentConfig":
        data = dict(d)
        if "lambda" in data:
            data["coupling"] = data.pop("lambda")
        known = set(ExperimentConfig.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("beta", "c_interval", "dims", "m_bits", "t_schedule"):
            if key in data and isinstance(data[key], list):
                data[key] = tuple(data[key])
        try:
            return ExperimentConfig(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @staticmethod
    def from_json_file(path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        return ExperimentConfig.from_json_dict(d)

    def override(self, **kwargs) -> "ExperimentConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs)


_KIND_DEFAULTS = {
    "dos_histogram": dict(n=5, k=6, samples=500, coupling=0.0),
    "bath_ensemble": dict(n=2, k=3, beta=(2.0,), samples=100),
    "beta_sweep": dict(n=2, k=3, beta=(0.5, 1.0, 2.0, 3.0, 5.0), samples=100),
    "zeno_probe": dict(n=1, k=2, samples=10),
    "chain2_sweep": dict(n=3, beta=(0.5, 2.0, 5.0), samples=20),
    "random_dm_distance": dict(samples=1000),
    "correlation_sweep": dict(n=1, beta=(1.0,), samples=1),
}


def default_config(kind: str) -> ExperimentConfig:
    """Per-kind defaults (config files and CLI flags override them)."""
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}")
    return ExperimentConfig(kind=kind, **_KIND_DEFAULTS.get(kind, {}))
