import dataclasses
import logging
import math
import typing
from enum import Enum
from typing import Dict, List, Optional

import yaml
from pydantic import Field, dataclasses as pydantic_dataclasses, field_validator

from ricci_lab.file import check_file
from ricci_lab.flow import FlowConfig
from ricci_lab.geometry import MAX_PERTURBATION, MIN_NODES, ProfileFamily
from ricci_lab.soliton import DEFAULT_R_MAX, DEFAULT_STEP
from ricci_lab.type import PathType

_logger = logging.getLogger(__name__)

IDENTITY_SWEEP = (-0.5, -0.3, -0.1, 0.0, 0.1, 0.3, 0.5)


def _check_grid_size(value: int) -> int:
    if value < MIN_NODES or value % 2 == 0:
        raise ValueError(f"grid size must be an odd integer >= {MIN_NODES}, not {value}")
    return value


@pydantic_dataclasses.dataclass(frozen=True)
class ProfileConfig:
    family: ProfileFamily = ProfileFamily.ROUND
    n: int = 61
    eps: float = 0.0
    k: int = Field(default=1, ge=1)

    @field_validator("n")
    @classmethod
    def _odd_grid(cls, value):
        return _check_grid_size(value)

    @field_validator("eps")
    @classmethod
    def _bounded_perturbation(cls, value):
        if abs(value) >= MAX_PERTURBATION:
            raise ValueError(f"|eps| must be below {MAX_PERTURBATION}, not {value}")
        return value


@pydantic_dataclasses.dataclass(frozen=True)
class FlowRunConfig:
    profile: ProfileConfig = Field(default_factory=ProfileConfig)
    flow: FlowConfig = Field(default_factory=FlowConfig)
    diagnostics_csv: str = "diagnostics.csv"
    snapshot_dir: Optional[str] = None
    snapshot_every: int = Field(default=0, ge=0)


@pydantic_dataclasses.dataclass(frozen=True)
class ShootConfig:
    step: float = Field(default=DEFAULT_STEP, gt=0)
    r_max: float = Field(default=DEFAULT_R_MAX, gt=0)


@pydantic_dataclasses.dataclass(frozen=True)
class SweepConfig:
    shoot: ShootConfig = Field(default_factory=ShootConfig)
    a_values: Optional[List[float]] = None
    a_min: float = -0.5
    a_max: float = 0.5
    a_step: float = Field(default=0.1, gt=0)
    workers: int = Field(default=1, ge=0)
    output_csv: str = "soliton_sweep.csv"
    trajectory_dir: Optional[str] = None

    def __post_init__(self):
        if self.a_values is None and self.a_min > self.a_max:
            raise ValueError(f"a_min ({self.a_min}) must not exceed a_max ({self.a_max})")
        if self.a_values is not None and not self.a_values:
            raise ValueError("a_values must not be empty")

    def values(self) -> List[float]:
        if self.a_values is not None:
            return sorted(float(a) for a in self.a_values)
        count = int(math.floor((self.a_max - self.a_min) / self.a_step + 1e-9)) + 1
        # rounding keeps 0.1-steps free of accumulated binary noise
        return [round(self.a_min + i * self.a_step, 12) for i in range(count)]


@pydantic_dataclasses.dataclass(frozen=True)
class SolveConfig:
    shoot: ShootConfig = Field(default_factory=ShootConfig)
    a_lo: float = -1.0
    a_hi: float = 1.0
    tol: float = Field(default=1e-8, gt=0)
    a_tolerance: float = Field(default=1e-6, gt=0)
    n: int = 1001
    output_json: Optional[str] = None

    @field_validator("n")
    @classmethod
    def _odd_grid(cls, value):
        return _check_grid_size(value)

    def __post_init__(self):
        if not self.a_lo < self.a_hi:
            raise ValueError(f"Bracket must satisfy a_lo < a_hi, got [{self.a_lo}, {self.a_hi}]")


@pydantic_dataclasses.dataclass(frozen=True)
class IdentityCheckConfig:
    shoot: ShootConfig = Field(default_factory=ShootConfig)
    a_values: List[float] = Field(default_factory=lambda: list(IDENTITY_SWEEP))
    residual_tolerance: float = Field(default=1e-8, gt=0)
    # well above the roundoff floor, where the fourth order is visible
    order_step: float = Field(default=0.04, gt=0)
    min_ratio: float = Field(default=12.0, gt=1)
    output_json: Optional[str] = None


class Fault(Enum):
    BROKEN_STENCIL = "broken_stencil"


@pydantic_dataclasses.dataclass(frozen=True)
class VerifyConfig:
    n: int = 1001
    order_grids: List[int] = Field(default_factory=lambda: [251, 501, 1001])
    flow_n: int = 201
    fixed_point_steps: int = Field(default=10_000, ge=1)
    shoot: ShootConfig = Field(default_factory=ShootConfig)
    a_values: List[float] = Field(default_factory=lambda: list(IDENTITY_SWEEP))
    order_step: float = Field(default=0.04, gt=0)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    fault: Optional[Fault] = None
    output_json: Optional[str] = None

    @field_validator("n", "flow_n")
    @classmethod
    def _odd_grid(cls, value):
        return _check_grid_size(value)

    @field_validator("order_grids")
    @classmethod
    def _odd_grids(cls, value):
        if len(value) < 2:
            raise ValueError("order_grids needs at least two grid sizes")
        return [_check_grid_size(n) for n in value]


@pydantic_dataclasses.dataclass(frozen=True)
class DiagnoseConfig:
    profile_csv: str
    output_json: Optional[str] = None


def load_config(config_class, config_path: Optional[PathType] = None, overrides: Optional[dict] = None):
    """
    Read a YAML (or JSON) document, apply flag overrides (flags win) and validate it into config_class.
    """
    document = {}
    if config_path is not None:
        check_file(config_path)
        try:
            with open(config_path) as fin:
                document = yaml.safe_load(fin) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Config '{config_path}' is not valid YAML/JSON: {e}")
        if not isinstance(document, dict):
            raise ConfigError(f"Config '{config_path}' must be a mapping, not {type(document).__name__}")
    merged = _merge(document, overrides or {})
    _check_variables(config_class, merged, config_path)
    try:
        config = config_class(**merged)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"Invalid config '{config_path}': {e}")
    _logger.debug(f"Loaded config {config}")
    return config


def _merge(document: dict, overrides: dict) -> dict:
    merged = dict(document)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            section = merged.get(key) or {}
            if not isinstance(section, dict):
                raise ConfigError(f"Section '{key}' must be a mapping")
            merged[key] = _merge(section, value)
        else:
            merged[key] = value
    return merged


def _check_variables(config_class, variables: dict, config_path):
    hints = typing.get_type_hints(config_class)
    known = {field.name for field in dataclasses.fields(config_class)}
    unknown = set(variables).difference(known)
    if unknown:
        raise UndefinedVariable(f"Variables '{sorted(unknown)}' are not defined in {config_class.__name__} "
                                f"(config '{config_path}')")
    for name, value in variables.items():
        if isinstance(value, dict) and dataclasses.is_dataclass(hints.get(name)):
            _check_variables(hints[name], value, config_path)


def config_as_dict(config) -> dict:
    """ Plain JSON-able view of a config """
    def convert(value):
        if isinstance(value, Enum):
            return value.value
        if isinstance(value, dict):
            return {k: convert(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [convert(v) for v in value]
        return value
    return convert(dataclasses.asdict(config))


class ConfigError(ValueError):
    pass


class UndefinedVariable(ConfigError):
    pass
