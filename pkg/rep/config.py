"""
Run configuration: a validated pydantic tree loaded from TOML or YAML.

Example (TOML):

    [physics]
    c = 1.0
    gamma = 2.0
    a = 0.5

    [grid]
    n_cells = 400
    r_max = 2.0
    R = 1.0

    [initial_data]
    family = "ball"
    A = 0.05
    V = 0.1
    m = 4

    [testing_function]
    name = "r"
"""

import logging
import os
import tomllib
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .certificate import TestingFunction, make_testing_function
from .model import PhysicalParams, PrimitiveState, RadialGrid, subcritical

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PhysicsConfig(_Section):
    c: float = Field(1.0, gt=0)
    gamma: float = Field(2.0, gt=1)
    a: float = Field(0.5, gt=0, lt=1)
    e0: float = Field(0.0, ge=0)


class GridConfig(_Section):
    n_cells: int = Field(400, ge=3)
    r_max: float = Field(2.0, gt=0)
    R: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _support_fits(self):
        if self.r_max < self.R:
            raise ValueError(f"r_max ({self.r_max}) must be >= R ({self.R})")
        return self


class BallData(_Section):
    """rho0 = A (1 - (r/R)^2)_+^m, v0 = V (r/R) (1 - (r/R)^2)_+^m."""
    family: Literal["ball"] = "ball"
    A: float = Field(0.05, ge=0)
    V: float = 0.0
    m: float = Field(2.0, ge=1)


class CustomData(_Section):
    """Tabulated (r, rho0, v0) samples, linearly interpolated on [0, R]."""
    family: Literal["custom"]
    r: list[float]
    rho: list[float]
    v: list[float]

    @model_validator(mode="after")
    def _table_shape(self):
        if not (len(self.r) == len(self.rho) == len(self.v)) or len(self.r) < 2:
            raise ValueError("r, rho and v must have the same length (>= 2)")
        if np.any(np.diff(self.r) <= 0):
            raise ValueError("r must be strictly increasing")
        if self.r[0] < 0:
            raise ValueError("r must start at or above 0")
        if min(self.rho) < 0:
            raise ValueError("rho must be >= 0")
        return self


InitialData = Annotated[Union[BallData, CustomData], Field(discriminator="family")]


class TestingFunctionConfig(_Section):
    __test__ = False

    name: Literal["r", "r2", "r3", "sin"] = "r"
    R_cut: float | None = Field(None, gt=0)


class RunSection(_Section):
    t_final: float = Field(1.0, gt=0)
    cfl: float = Field(0.4, gt=0, lt=1)
    output_every: int = Field(10, ge=1)
    dt_min_factor: float = Field(1e-12, gt=0)
    velocity_guard: float = Field(1e-9, gt=0, lt=1)
    recovery_tol: float = Field(1e-12, gt=0)
    self_field: bool = True
    seed: int = 0


class MonitorConfig(_Section):
    quad_n: int = Field(10_000, ge=2)
    tol_monitor: float = Field(0.05, ge=0, lt=1)
    mass_fraction: float = Field(1e-6, gt=0, lt=1)
    n_paths: int = Field(8, ge=0)


class RunConfig(_Section):
    physics: PhysicsConfig = Field(default_factory=PhysicsConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    initial_data: InitialData = Field(default_factory=BallData)
    testing_function: TestingFunctionConfig = Field(default_factory=TestingFunctionConfig)
    run: RunSection = Field(default_factory=RunSection)
    monitor: MonitorConfig = Field(default_factory=MonitorConfig)

    def physical_params(self) -> PhysicalParams:
        p = self.physics
        return PhysicalParams(c=p.c, gamma=p.gamma, a=p.a, e0=p.e0)

    def radial_grid(self) -> RadialGrid:
        g = self.grid
        return RadialGrid(n_cells=g.n_cells, r_max=g.r_max, R=g.R)

    def initial_profile(self):
        """(rho0, v0) callables of r, zero outside [0, R]."""
        R = self.grid.R
        data = self.initial_data
        if isinstance(data, BallData):
            def bump(r):
                return np.maximum(1.0 - (np.asarray(r, dtype=float) / R) ** 2, 0.0) ** data.m

            def rho0(r):
                return data.A * bump(r)

            def v0(r):
                return data.V * (np.asarray(r, dtype=float) / R) * bump(r)
            return rho0, v0

        table_r = np.asarray(data.r, dtype=float)

        def tabulated(values):
            values = np.asarray(values, dtype=float)

            def profile(r):
                r = np.asarray(r, dtype=float)
                out = np.interp(r, table_r, values, left=values[0], right=0.0)
                return np.where(r <= min(R, table_r[-1]), out, 0.0)
            return profile
        return tabulated(data.rho), tabulated(data.v)

    def initial_state(self, grid: RadialGrid | None = None) -> PrimitiveState:
        """Cell-centred initial data with v = 0 on vacuum cells."""
        grid = grid or self.radial_grid()
        rho0, v0 = self.initial_profile()
        rho = rho0(grid.centers)
        v = np.where(rho > 0, v0(grid.centers), 0.0)
        return PrimitiveState(rho, v)

    def testing_function_fn(self) -> TestingFunction:
        tf = self.testing_function
        return make_testing_function(tf.name, R_cut=tf.R_cut or 2.0 * self.grid.R)


def _load_mapping(path: Path) -> dict:
    suffix = path.suffix.lower()
    if suffix == ".toml":
        with open(path, "rb") as f:
            return tomllib.load(f)
    if suffix in {".yaml", ".yml"}:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
        return data or {}
    raise ConfigError(f"unsupported config format '{suffix}' (use .toml, .yaml or .yml)", field="<file>")


def parse_config(path: str | Path) -> RunConfig:
    """
    Load and validate a run configuration.

    Args:
        path: .toml, .yaml or .yml file

    Returns:
        Validated RunConfig with defaults applied

    Raises:
        FileNotFoundError: path does not exist
        ConfigError: missing or invalid field (names the field)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        raw = _load_mapping(path)
    except (tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse file: {e}", field="<file>") from e
    return build_config(raw)


def _check_cross_fields(config: RunConfig) -> None:
    c = config.physics.c
    data = config.initial_data
    if isinstance(data, BallData) and abs(data.V) >= c:
        raise ConfigError(f"|V| = {abs(data.V)} violates subluminality |V| < c = {c}", field="initial_data.V")
    if isinstance(data, CustomData) and max(abs(x) for x in data.v) >= c:
        raise ConfigError(f"tabulated v violates subluminality |v| < c = {c}", field="initial_data.v")
    tf = config.testing_function
    if tf.name == "sin" and tf.R_cut is not None and tf.R_cut <= config.grid.R:
        raise ConfigError(f"R_cut = {tf.R_cut} must be > R = {config.grid.R}", field="testing_function.R_cut")


def build_config(raw: dict) -> RunConfig:
    """Validate an already-loaded mapping (see parse_config)."""
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(first["msg"], field=where) from e

    _check_cross_fields(config)
    params = config.physical_params()
    rho0 = config.initial_state().rho
    if not np.all(subcritical(rho0, params)):
        logger.warning("Initial density violates p'(rho) < a c^2 somewhere; certify will refuse this data")
    return config


def worker_count() -> int:
    """Worker pool width from REP_THREADS (default: CPU count)."""
    raw = os.getenv("REP_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(f"Ignoring invalid REP_THREADS={raw!r}")
    return os.cpu_count() or 1
