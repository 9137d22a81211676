"""Experiment configuration: one YAML file fully determines a run."""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .errors import ConfigurationError
from .ics import ROUNDED_SQUARE, SYMMETRIC_GAUSSIAN, make_initial_condition
from .mesh import HENKY, LINEAR_ELASTIC, ConstitutiveModel
from .newmark import NewmarkParams
from .schwarz import TRANSFER_CONSISTENT, TRANSFER_STRESS

PIPELINE_REPRODUCTIVE = "reproductive"
PIPELINE_PREDICTIVE = "predictive"

FOM_KIND = "fom"
ROM_KIND = "rom"
HROM_KIND = "hrom"


@dataclass(frozen=True)
class GeometryConfig:
    x_left: float = 0.0
    x_right: float = 1.0
    split: float = 0.6
    overlap: float = 0.0

    def __post_init__(self):
        if not self.x_left < self.split < self.x_right:
            raise ConfigurationError("decomposition split must lie inside the geometry")
        if self.overlap < 0.0:
            raise ConfigurationError("overlap width cannot be negative")

    @property
    def overlapping(self) -> bool:
        return self.overlap > 0.0


@dataclass(frozen=True)
class IcConfig:
    kind: str
    a: float
    b: float
    s: float

    def __post_init__(self):
        if self.kind not in (SYMMETRIC_GAUSSIAN, ROUNDED_SQUARE):
            raise ConfigurationError(f"unknown ic kind {self.kind!r}")

    def build(self):
        return make_initial_condition(self.kind, self.a, self.b, self.s)


@dataclass(frozen=True)
class ScaleConfig:
    dx1: float
    dx2: float
    dt: float
    controller_dt: float
    final_time: float
    training_final_time: float | None = None  # defaults to final_time

    def __post_init__(self):
        for name in ("dx1", "dx2", "dt", "controller_dt", "final_time"):
            if getattr(self, name) <= 0.0:
                raise ConfigurationError(f"{name} must be positive")
        if self.training_final_time is not None and self.training_final_time <= 0.0:
            raise ConfigurationError("training_final_time must be positive")

    @property
    def train_time(self) -> float:
        return self.training_final_time if self.training_final_time is not None else self.final_time


@dataclass(frozen=True)
class IntegratorConfig:
    beta: float = 0.49
    gamma: float = 0.9
    newton_tol: float = 1e-10
    newton_max_iters: int = 25

    def params(self, dt: float) -> NewmarkParams:
        return NewmarkParams(self.beta, self.gamma, dt, self.newton_tol, self.newton_max_iters)


@dataclass(frozen=True)
class SchwarzSettings:
    delta: float = 1e-11
    theta: float = 1.0
    max_iters: int = 60
    transfer: str = TRANSFER_CONSISTENT

    def __post_init__(self):
        if self.transfer not in (TRANSFER_STRESS, TRANSFER_CONSISTENT):
            raise ConfigurationError(f"unknown transfer mode {self.transfer!r}")


@dataclass(frozen=True)
class SideSpec:
    kind: str
    modes: int | None = None
    energy: float | None = None

    def __post_init__(self):
        if self.kind not in (FOM_KIND, ROM_KIND, HROM_KIND):
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        if self.kind != FOM_KIND and (self.modes is None) == (self.energy is None):
            raise ConfigurationError("reduced sides need exactly one of modes or energy")

    @property
    def size_key(self) -> str:
        if self.kind == FOM_KIND:
            return "fom"
        if self.modes is not None:
            return f"m{self.modes}"
        return f"e{self.energy!r}"


@dataclass(frozen=True)
class VariantSpec:
    label: str
    omega1: SideSpec
    omega2: SideSpec

    @property
    def sides(self):
        return (self.omega1, self.omega2)


@dataclass(frozen=True)
class TrainingConfig:
    pod_stride: int = 1
    ecsw_stride: int = 500
    nnls_step_tol: float = 1e-4
    nnls_max_iters: int | None = None


@dataclass(frozen=True)
class OutputConfig:
    times: tuple = ()
    projection_modes: tuple = ()


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: str
    geometry: GeometryConfig
    model: ConstitutiveModel
    ic: IcConfig
    integrator: IntegratorConfig
    schwarz: SchwarzSettings
    scales: dict
    variants: tuple
    training: TrainingConfig
    output: OutputConfig
    predictive_ic: IcConfig | None = None
    include_monolithic: bool = False

    def scale(self, name: str) -> ScaleConfig:
        if name not in self.scales:
            raise ConfigurationError(
                f"scale {name!r} not defined; available: {sorted(self.scales)}"
            )
        return self.scales[name]


def _side_spec(raw) -> SideSpec:
    kind = raw.get("kind", FOM_KIND)
    modes = raw.get("modes")
    energy = raw.get("energy")
    return SideSpec(kind, None if modes is None else int(modes), energy)


def config_from_dict(raw: dict) -> ExperimentConfig:
    try:
        pipeline = raw.get("pipeline", PIPELINE_REPRODUCTIVE)
        if pipeline not in (PIPELINE_REPRODUCTIVE, PIPELINE_PREDICTIVE):
            raise ConfigurationError(f"unknown pipeline {pipeline!r}")

        geometry = GeometryConfig(**raw.get("geometry", {}))

        mat = raw.get("material", {})
        kind = mat.get("model", HENKY)
        if kind not in (HENKY, LINEAR_ELASTIC):
            raise ConfigurationError(f"unknown material model {kind!r}")
        model = ConstitutiveModel(
            kind, float(mat.get("youngs_modulus", 1e9)), float(mat.get("density", 1000.0))
        )

        ic = IcConfig(**raw["ic"])
        predictive_ic = IcConfig(**raw["predictive_ic"]) if "predictive_ic" in raw else None
        if pipeline == PIPELINE_PREDICTIVE and predictive_ic is None:
            raise ConfigurationError("predictive pipeline needs a predictive_ic block")

        integrator = IntegratorConfig(**raw.get("integrator", {}))
        schwarz = SchwarzSettings(**raw.get("schwarz", {}))

        scales_raw = raw.get("scales")
        if not scales_raw:
            raise ConfigurationError("config needs a scales block with at least one profile")
        scales = {name: ScaleConfig(**params) for name, params in scales_raw.items()}

        variants = tuple(
            VariantSpec(v["label"], _side_spec(v.get("omega1", {})), _side_spec(v.get("omega2", {})))
            for v in raw.get("variants", [])
        )
        labels = [v.label for v in variants]
        if len(set(labels)) != len(labels):
            raise ConfigurationError("variant labels must be unique")

        training = TrainingConfig(**raw.get("training", {}))
        out_raw = raw.get("output", {})
        output = OutputConfig(
            times=tuple(float(t) for t in out_raw.get("times", ())),
            projection_modes=tuple(int(m) for m in out_raw.get("projection_modes", ())),
        )
        return ExperimentConfig(
            pipeline=pipeline,
            geometry=geometry,
            model=model,
            ic=ic,
            integrator=integrator,
            schwarz=schwarz,
            scales=scales,
            variants=variants,
            training=training,
            output=output,
            predictive_ic=predictive_ic,
            include_monolithic=bool(raw.get("include_monolithic", False)),
        )
    except (KeyError, TypeError) as err:
        raise ConfigurationError(f"invalid experiment config: {err}") from err


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a mapping at the top level")
    return config_from_dict(raw)

