"""Run configuration: a TOML document fully determines a run."""
from __future__ import annotations

from typing import Literal, Optional, Union

import pydantic
import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ParseError, ValidationError
from .hamiltonian import FieldVector, PhysicalConstants, ZfsParams
from .noise import NoiseParams, ShiftModel


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Physics(_Section):
    d: float = Field(gt=0)
    e: float = Field(ge=0)
    gamma: float = Field(2.8025, gt=0)


class Noise(_Section):
    b_rms: tuple[float, float, float]
    tau0: Optional[float] = Field(None, gt=0)
    tau0_profile: Optional[list[tuple[float, float]]] = None

    @field_validator("b_rms")
    @classmethod
    def _non_negative(cls, v):
        if any(x < 0 for x in v):
            raise ValueError("b_rms entries must be >= 0")
        return v

    @field_validator("tau0_profile")
    @classmethod
    def _profile(cls, v):
        if v is not None:
            if len(v) < 1:
                raise ValueError("tau0_profile needs at least one knot")
            if any(b < 0 or t <= 0 for b, t in v):
                raise ValueError("tau0_profile knots need B >= 0 and tau0 > 0")
        return v

    @model_validator(mode="after")
    def _one_tau(self):
        if (self.tau0 is None) == (self.tau0_profile is None):
            raise ValueError("exactly one of tau0 / tau0_profile must be given")
        return self


class FieldSpec(_Section):
    magnitude: Optional[float] = Field(None, ge=0)
    theta: Optional[float] = None
    phi: float = 0.0
    components: Optional[tuple[float, float, float]] = None

    @model_validator(mode="after")
    def _one_form(self):
        polar = self.magnitude is not None or self.theta is not None
        if polar == (self.components is not None):
            raise ValueError("give either magnitude/theta(/phi) or components")
        if polar:
            if self.magnitude is None or self.theta is None:
                raise ValueError("polar form needs both magnitude and theta")
            if not 0 <= self.theta <= 90:
                raise ValueError("theta must lie in [0, 90] degrees")
        return self

    def vector(self) -> FieldVector:
        if self.components is not None:
            return FieldVector(*self.components)
        return FieldVector.from_polar(self.magnitude, self.theta, self.phi)


class Sequence(_Section):
    kind: Literal["fid", "hahn", "cpmg"] = "hahn"
    n_pi: int = Field(1, ge=0)
    branch: Literal["plus", "minus"] = "minus"
    model: ShiftModel = ShiftModel.EXACT
    times: Union[Literal["auto"], list[float]] = "auto"
    auto_points: int = Field(10, ge=4)

    @field_validator("times")
    @classmethod
    def _increasing(cls, v):
        if v != "auto":
            if len(v) < 4:
                raise ValueError("need at least 4 times")
            if any(t < 0 for t in v) or any(b <= a for a, b in zip(v, v[1:])):
                raise ValueError("times must be non-negative and strictly increasing")
        return v


class MonteCarlo(_Section):
    n_traj: int = Field(2000, ge=100)
    dt: Optional[float] = Field(None, gt=0)
    seed: int = Field(0, ge=0, lt=2**64)
    threads: int = Field(1, ge=1)


def _grid_ok(v, lo, hi, name):
    if any(b <= a for a, b in zip(v, v[1:])):
        raise ValueError(f"{name} must be strictly increasing")
    if any(not lo <= x <= hi for x in v):
        raise ValueError(f"{name} must lie in [{lo}, {hi}]")
    return v


class SweepAngle(_Section):
    thetas: list[float] = Field(default_factory=lambda: [0, 15, 30, 45, 55, 60, 65, 75, 80, 85, 87, 89, 90])
    masked: list[float] = Field(default_factory=list)

    @field_validator("thetas")
    @classmethod
    def _thetas(cls, v):
        return _grid_ok(v, 0, 90, "thetas")


class SweepField(_Section):
    magnitudes: list[float] = Field(default_factory=lambda: [5, 10, 15, 20, 25, 35, 50, 75])
    orientations: list[Literal["parallel", "perpendicular"]] = Field(
        default_factory=lambda: ["parallel", "perpendicular"]
    )

    @field_validator("magnitudes")
    @classmethod
    def _mags(cls, v):
        return _grid_ok(v, 1e-12, float("inf"), "magnitudes")


class Cpmg(_Section):
    n_list: list[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16])
    time_grid: Literal["total", "spacing"] = "total"

    @field_validator("n_list")
    @classmethod
    def _n(cls, v):
        return _grid_ok(v, 1, 10**6, "n_list")


class Validate(_Section):
    magnitudes: list[float] = Field(default_factory=lambda: [float(b) for b in range(0, 155, 5)])
    axes: list[Literal["x", "z"]] = Field(default_factory=lambda: ["x", "z"])

    @field_validator("magnitudes")
    @classmethod
    def _mags(cls, v):
        return _grid_ok(v, 0, float("inf"), "magnitudes")


class Suppression(_Section):
    magnitudes: Optional[list[float]] = None  # defaults to the field magnitude
    n_samples: int = Field(100_000, ge=10_000)


class Output(_Section):
    out_dir: str = "out"
    svg: bool = False


class RunConfig(_Section):
    physics: Physics
    noise: Noise
    field: FieldSpec
    sequence: Sequence = Sequence()
    monte_carlo: MonteCarlo = MonteCarlo()
    sweep_angle: SweepAngle = SweepAngle()
    sweep_field: SweepField = SweepField()
    cpmg: Cpmg = Cpmg()
    validate_perturbation: Validate = Validate()
    suppression: Suppression = Suppression()
    output: Output = Output()

    # convenience views onto the physics types
    @property
    def zfs(self) -> ZfsParams:
        return ZfsParams(self.physics.d, self.physics.e)

    @property
    def consts(self) -> PhysicalConstants:
        return PhysicalConstants(self.physics.gamma)

    def noise_at(self, b_gauss: float | None = None) -> NoiseParams:
        if self.noise.tau0 is not None:
            return NoiseParams(self.noise.b_rms, self.noise.tau0)
        from .analysis import interpolate_tau0

        b = self.field.vector().magnitude if b_gauss is None else b_gauss
        return NoiseParams(self.noise.b_rms, interpolate_tau0(self.noise.tau0_profile, b))


def _describe(err: pydantic.ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def config_from_dict(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        raise ValidationError(_describe(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(str(exc)) from None
    return config_from_dict(data)


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    """TOML text that re-parses to an equal configuration."""
    return tomli_w.dumps(cfg.model_dump(mode="json", exclude_none=True))
