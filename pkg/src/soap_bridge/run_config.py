import re
from dataclasses import dataclass
from logging import WARNING
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from packaging import version
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    ValidationInfo,
    field_validator,
    model_validator,
)
from tomlkit.exceptions import ParseError

from soap_bridge.catenoid import catenoid_for
from soap_bridge.elliptic import SolverConfig
from soap_bridge.exceptions import ConfigError, SoapBridgeError
from soap_bridge.mesh import MIN_FILM_NODES, FilmProfile, Grid1D, build_grid1d
from soap_bridge.stepper import Params, StepperConfig
from soap_bridge.utils import Toml, log

CURRENT_CONFIG_VERSION = version.parse("1.0")

IC_PATTERN = re.compile(
    r"^\s*(?P<kind>zero|samples|catenoid|scaled_catenoid)\s*(?:\(\s*(?P<arg>[^)]*?)\s*\))?\s*$"
)


@dataclass(frozen=True)
class InitialCondition:
    kind: str
    branch: str = "small"
    factor: float = 1.0

    @staticmethod
    def parse(text: str) -> "InitialCondition":
        m = IC_PATTERN.match(text)
        if not m:
            raise ValueError(f"unknown initial condition '{text}'")
        kind, arg = m.group("kind"), m.group("arg")
        if kind == "catenoid":
            if arg not in ("small", "large"):
                raise ValueError("catenoid initial condition needs a branch: small or large")
            return InitialCondition(kind, branch=arg)
        if kind == "scaled_catenoid":
            try:
                return InitialCondition(kind, factor=float(arg or ""))
            except ValueError:
                raise ValueError(f"scaled_catenoid needs a numeric factor, got '{arg}'")
        if arg:
            raise ValueError(f"initial condition '{kind}' takes no argument")
        return InitialCondition(kind)

    @property
    def uses_catenoid(self) -> bool:
        return self.kind in ("catenoid", "scaled_catenoid")

    def build(
        self, grid: Grid1D, sigma: float, samples: Optional[list[float]] = None
    ) -> FilmProfile:
        if self.kind == "zero":
            return FilmProfile.zero(grid)
        if self.kind == "samples":
            values = np.asarray(samples or [], dtype=float)
            nodes = np.linspace(-1.0, 1.0, values.size)
            return FilmProfile.create(grid, np.interp(grid.z, nodes, values))
        u_cat = catenoid_for(sigma, self.branch).profile(grid)
        return u_cat if self.kind == "catenoid" else u_cat.with_values(self.factor * u_cat.u)


class StepperSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pinch_eps: float = Field(0.02, gt=0, lt=0.5)
    touch_eps: float = Field(0.02, gt=0, lt=0.5)
    kappa: float = Field(0.01, gt=0)
    q: float = Field(4.0, ge=1)
    adapt_factor: float = Field(1.5, ge=1)
    max_change_per_step: float = Field(0.01, gt=0, validate_default=True)

    @field_validator("max_change_per_step")
    @classmethod
    def _below_detector_margins(cls, value: float, info: ValidationInfo) -> float:
        margin = min(info.data.get("pinch_eps", 0.02), info.data.get("touch_eps", 0.02))
        if value >= margin:
            raise ValueError(f"must be below min(pinch_eps, touch_eps) = {margin}")
        return value


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    method: Literal["direct", "bicgstab"] = "direct"
    tol: float = Field(1e-10, gt=0)
    maxiter: int = Field(2000, gt=0)


class OutputSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str = "sb-output"
    snapshots: bool = False
    report: bool = True


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    config_version: str = str(CURRENT_CONFIG_VERSION)
    sigma: float = Field(..., gt=0)
    lam: float = Field(0.0, ge=0, alias="lambda")
    n_z: int = 129
    n_r: int = Field(129, ge=4)
    dt_init: float = Field(1e-4, gt=0)
    dt_min: float = Field(1e-10, gt=0)
    dt_max: float = Field(1e-2, gt=0)
    T_end: float = Field(1.0, gt=0)
    sample_interval: float = Field(0.01, gt=0)
    ic: str = "zero"
    ic_samples: Optional[list[float]] = None
    stepper: StepperSettings = Field(default_factory=StepperSettings)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)

    @field_validator("n_z")
    @classmethod
    def _odd_film_nodes(cls, n_z: int) -> int:
        if n_z < MIN_FILM_NODES or n_z % 2 == 0:
            raise ValueError(f"n_z must be an odd integer >= {MIN_FILM_NODES}")
        return n_z

    @field_validator("ic")
    @classmethod
    def _known_ic(cls, ic: str) -> str:
        InitialCondition.parse(ic)
        return ic

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        if not self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("step bounds must satisfy dt_min <= dt_init <= dt_max")
        if self.initial_condition.kind == "samples" and not self.ic_samples:
            raise ValueError("ic = 'samples' needs a non-empty ic_samples list")
        return self

    @property
    def initial_condition(self) -> InitialCondition:
        return InitialCondition.parse(self.ic)

    def initial_profile(self, grid: Optional[Grid1D] = None) -> FilmProfile:
        grid = grid or build_grid1d(self.n_z)
        return self.initial_condition.build(grid, self.sigma, self.ic_samples)

    def stepper_config(self) -> StepperConfig:
        return StepperConfig.create(
            dt_init=self.dt_init,
            dt_min=self.dt_min,
            dt_max=self.dt_max,
            **self.stepper.model_dump(),
        )

    def solver_config(self) -> SolverConfig:
        return SolverConfig.create(self.solver.method, self.solver.tol, self.solver.maxiter)

    def params(self) -> Params:
        return Params.create(self.sigma, self.lam, self.n_z, self.n_r, self.solver_config())

    def at_point(self, sigma: float, lam: float) -> "RunConfig":
        return self.model_copy(update={"sigma": sigma, "lam": lam})

    def echo(self) -> dict[str, Any]:
        return self.model_dump(by_alias=True, exclude_none=True)


def _key_line(text: str, key: str) -> Optional[int]:
    name = re.escape(key.split(".")[-1])
    pattern = re.compile(rf'^\s*"?{name}"?\s*=')
    for lineno, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return lineno
    return None


def _check_version(data: dict[str, Any]) -> None:
    declared = str(data.get("config_version", CURRENT_CONFIG_VERSION))
    try:
        parsed = version.parse(declared)
    except version.InvalidVersion:
        raise ConfigError(f"invalid config_version '{declared}'", "config_version")
    if parsed > CURRENT_CONFIG_VERSION:
        raise ConfigError(
            f"config_version {declared} is newer than supported {CURRENT_CONFIG_VERSION}",
            "config_version",
        )
    if parsed < CURRENT_CONFIG_VERSION:
        log(WARNING, f"config_version {declared} is older than {CURRENT_CONFIG_VERSION}")


def parse_config_text(text: str) -> RunConfig:
    try:
        data = Toml.loads(text)
    except ParseError as e:
        raise ConfigError(f"malformed config: {e}", line=e.line)
    _check_version(data)
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(str(part) for part in err["loc"]) or None
        line = _key_line(text, key) if key else None
        raise ConfigError(err["msg"], key, line)
    try:
        profile = cfg.initial_profile()
    except SoapBridgeError as e:
        raise ConfigError(e.message, "ic", _key_line(text, "ic"))
    if not profile.is_admissible:
        raise ConfigError(
            "initial condition is not strictly inside (-1, 1)", "ic", _key_line(text, "ic")
        )
    return cfg


def parse_config(path: Path) -> RunConfig:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())
