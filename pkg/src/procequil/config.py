"""Run configuration: pydantic models, TOML loading and environment defaults.

Values come from three layers, later ones winning: environment variables
(``PROCEQUIL_OUTPUT_DIR``, ``PROCEQUIL_WORKERS``, ``PROCEQUIL_LOG_LEVEL``,
usually loaded from ``.env`` by the entry points), a TOML file, and
command-line flags applied through ``RunConfig.with_overrides``.
"""

from __future__ import annotations

import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError
from .sim.experiments import BathParameters, ProtocolCounts, d_E_range
from .sim.types import TimeMode

SCHEMA_VERSION = 1

CHECKS = ("variance", "tighter", "chebyshev", "distinguishability", "nonmarkov")


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DeffConfig(Section):
    """Effective dimension of a Hamiltonian and state, from files or the random-bath model."""
    hamiltonian: Optional[Path] = Field(default=None, description="operator CSV of H on S (x) E")
    state: Optional[Path] = Field(default=None, description="operator CSV of rho; maximally mixed if omitted")
    d_E: int = Field(default=50, ge=1, description="bath dimension when no Hamiltonian file is given")
    tol: Optional[float] = Field(default=None, gt=0.0, description="degeneracy merge tolerance")


class BoundsConfig(Section):
    """Randomized theorem-verification suite."""
    n_seeds: int = Field(default=200, ge=1)
    samples: int = Field(default=500, ge=1)
    d_E: List[int] = Field(default_factory=lambda: [8, 16, 32])
    steps: List[int] = Field(default_factory=lambda: [1, 2, 3])
    checks: List[str] = Field(default_factory=lambda: list(CHECKS))
    chebyshev_max_steps: int = Field(default=2, ge=1, description="observable decompositions grow as 4^k")
    window: Optional[float] = Field(default=None, gt=0.0, description="interval window; 10^3 / min gap if unset")
    dephased: bool = Field(default=False, description="sample the equilibrium process itself")
    hamiltonian: Literal["random", "resonant"] = "random"

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, v):
        unknown = sorted(set(v) - set(CHECKS))
        if unknown:
            raise ValueError(f"unknown checks {unknown}; choose from {list(CHECKS)}")
        return v

    @field_validator("d_E", "steps")
    @classmethod
    def _positive(cls, v):
        if not v or any(x < 1 for x in v):
            raise ValueError("must be a non-empty list of positive integers")
        return v


class Fig2Config(Section):
    """Random-bath non-Markovianity sweep."""
    omega: float = Field(default=0.5, gt=0.0)
    delta: float = 0.2
    lam: float = Field(default=0.1, ge=0.0)
    d_E_min: int = Field(default=4, ge=1)
    d_E_max: int = Field(default=120, ge=1)
    d_E_step: int = Field(default=4, ge=1)
    modes: List[TimeMode] = Field(default_factory=lambda: [TimeMode.LONG, TimeMode.DEPHASED])
    n_aminus: int = Field(default=20, ge=2)
    n_aplus: int = Field(default=25, ge=1)
    n_models: int = Field(default=12, ge=1)
    bin: int = Field(default=5, ge=1)
    full_scale: bool = Field(default=False, description="d_E up to 400 in steps of 2 with 40 model draws")

    def effective(self) -> "Fig2Config":
        if not self.full_scale:
            return self
        return self.model_copy(update={"d_E_min": 2, "d_E_max": 400, "d_E_step": 2, "n_models": 40})

    def d_E_values(self) -> List[int]:
        cfg = self.effective()
        return d_E_range(cfg.d_E_min, cfg.d_E_max, cfg.d_E_step)

    def bath(self) -> BathParameters:
        return BathParameters(omega=self.omega, delta=self.delta, lam=self.lam)

    def counts(self) -> ProtocolCounts:
        cfg = self.effective()
        return ProtocolCounts(n_aminus=cfg.n_aminus, n_aplus=cfg.n_aplus, n_models=cfg.n_models)


# name used by library callers
ExperimentConfig = Fig2Config


class DiamondConfig(Section):
    """Operational distinguishability of a random-bath process from its equilibrium."""
    d_E: int = Field(default=32, ge=1)
    steps: int = Field(default=1, ge=1)
    n_instruments: int = Field(default=3, ge=1)
    samples: int = Field(default=500, ge=1)
    window: Optional[float] = Field(default=None, gt=0.0)


class NonmarkovConfig(Section):
    """Causal-break non-Markovianity and its equilibration bound."""
    d_E: int = Field(default=32, ge=1)
    steps: int = Field(default=3, ge=2)
    k_minus: int = Field(default=1, ge=1)
    samples: int = Field(default=500, ge=1)
    window: Optional[float] = Field(default=None, gt=0.0)

    @field_validator("k_minus")
    @classmethod
    def _before_break(cls, v, info):
        steps = info.data.get("steps", 3)
        if v >= steps:
            raise ValueError("k_minus must leave at least one step after the break")
        return v


class TensorConfig(Section):
    """Process-tensor dump for regression goldens."""
    d_E: int = Field(default=2, ge=1)
    steps: int = Field(default=2, ge=1)
    dts: Optional[List[float]] = None
    equilibrium: bool = False
    output: str = "process_tensor.csv"


def _env_output_dir() -> Path:
    return Path(os.getenv("PROCEQUIL_OUTPUT_DIR", "results"))


def _env_workers() -> int:
    try:
        return int(os.getenv("PROCEQUIL_WORKERS", "1"))
    except ValueError as exc:
        raise ConfigError(f"PROCEQUIL_WORKERS must be an integer: {exc}") from exc


def _env_log_level() -> str:
    return os.getenv("PROCEQUIL_LOG_LEVEL", "WARNING").upper()


class RunConfig(Section):
    """Top-level configuration shared by all subcommands."""
    schema_version: int = SCHEMA_VERSION
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default_factory=_env_workers, ge=0, description="0 means one per core")
    output_dir: Path = Field(default_factory=_env_output_dir)
    log_level: str = Field(default_factory=_env_log_level)

    deff: DeffConfig = Field(default_factory=DeffConfig)
    bounds: BoundsConfig = Field(default_factory=BoundsConfig)
    fig2: Fig2Config = Field(default_factory=Fig2Config)
    diamond: DiamondConfig = Field(default_factory=DiamondConfig)
    nonmarkov: NonmarkovConfig = Field(default_factory=NonmarkovConfig)
    tensor: TensorConfig = Field(default_factory=TensorConfig)

    @field_validator("schema_version")
    @classmethod
    def _supported(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; expected {SCHEMA_VERSION}")
        return v

    @classmethod
    def from_toml(cls, path: Path | str) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_mapping(data)

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, **flags: Any) -> "RunConfig":
        """Apply flag values; keys are field names or ``section__field``. ``None`` leaves a value alone."""
        data = self.model_dump()
        for key, value in flags.items():
            if value is None:
                continue
            section, _, name = key.partition("__")
            if name:
                if section not in data or not isinstance(data[section], dict):
                    raise ConfigError(f"unknown config section {section!r}")
                data[section][name] = value
            else:
                data[key] = value
        return self.from_mapping(data)


def load_config(path: Optional[Path | str] = None, **flags: Any) -> RunConfig:
    config = RunConfig.from_toml(path) if path else RunConfig()
    return config.with_overrides(**flags)
