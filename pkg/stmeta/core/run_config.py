"""
Per-run configuration.

A run is described by a YAML (or JSON) document with four sections:

    model:    circuit parameters, `kind: opamp | cmos`
    scenario: stimulus and per-subcommand parameters
    run:      span, tolerance, sample count, precision, workers
    output:   directory and artifact formats

Command-line overrides use dotted keys (`run.tol=1e-9`); the value is parsed
as a YAML scalar so numbers, booleans and lists keep their type.
"""

import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from stmeta.core.errors import ConfigError, ModelParameterError
from stmeta.models.cmos import CmosStModel
from stmeta.models.st_model import StModel
from stmeta.models.waveform import Segment

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ============================================================================
# Model section
# ============================================================================


class OpampModelConfig(StModel):
    """Clipped-linear model parameters."""

    kind: Literal["opamp"] = "opamp"

    def build(self) -> StModel:
        return StModel(**self.model_dump(exclude={"kind"}))


class CmosModelConfig(CmosStModel):
    """Square-law CMOS circuit parameters."""

    kind: Literal["cmos"] = "cmos"

    def build(self) -> CmosStModel:
        return CmosStModel(**self.model_dump(exclude={"kind"}, by_alias=True))


ModelConfig = Annotated[
    Union[OpampModelConfig, CmosModelConfig], Field(discriminator="kind")
]


# ============================================================================
# Scenario section
# ============================================================================


class ConstantInput(_Section):
    kind: Literal["constant"] = "constant"
    level: float


class StepInput(_Section):
    """Step relative to the thresholds: `after` may be written as V_H + ε."""

    kind: Literal["step"] = "step"
    before: Optional[float] = None
    after: Optional[float] = None
    epsilon: Optional[float] = Field(None, description="Overdrive above V_H when `after` is omitted")
    t_step: float = 0.0


class RampHoldInput(_Section):
    kind: Literal["ramp_and_hold"] = "ramp_and_hold"
    v0: float
    slope: float
    v_stop: float


class SineInput(_Section):
    kind: Literal["sine"] = "sine"
    offset: float = 0.0
    amplitude: float
    frequency_hz: float = Field(..., gt=0)
    phase: float = 0.0


class SquareInput(_Section):
    kind: Literal["square"] = "square"
    low: float
    high: float
    period: float = Field(..., gt=0)
    n_periods: int = Field(1, ge=1)
    duty: float = Field(0.5, gt=0, lt=1)
    start_high: bool = False


class StaircaseInput(_Section):
    kind: Literal["staircase"] = "staircase"
    levels: List[float] = Field(..., min_length=1)
    dwell: float = Field(..., gt=0)


class LatchInput(_Section):
    """Exponential departure of a resolving latch towards a rail."""

    kind: Literal["latch"] = "latch"
    v_meta: float
    v_rail: float
    tau_c: float = Field(..., gt=0)
    t_onset: float = Field(0.0, ge=0)


class CsvInput(_Section):
    kind: Literal["csv"] = "csv"
    path: str

    @model_validator(mode="after")
    def check_exists(self) -> "CsvInput":
        if not Path(self.path).is_file():
            raise ValueError(f"waveform file not found: {self.path}")
        return self


class SegmentsInput(_Section):
    kind: Literal["segments"] = "segments"
    segments: List[Segment] = Field(..., min_length=1)
    t_end: Optional[float] = None


InputSpec = Annotated[
    Union[
        ConstantInput,
        StepInput,
        RampHoldInput,
        SineInput,
        SquareInput,
        StaircaseInput,
        LatchInput,
        CsvInput,
        SegmentsInput,
    ],
    Field(discriminator="kind"),
]


class GridConfig(_Section):
    """Phase-map grid; omitted bounds default to the model's natural window."""

    v_in_min: Optional[float] = None
    v_in_max: Optional[float] = None
    v_out_min: Optional[float] = None
    v_out_max: Optional[float] = None
    n_in: int = Field(50, ge=2)
    n_out: int = Field(50, ge=2)


class SweepConfig(_Section):
    """Overdrive list, explicit or log-spaced between `eps_min` and `eps_max`."""

    sigma: float = Field(0.5, gt=0, lt=1)
    epsilons: Optional[List[float]] = None
    eps_min: Optional[float] = Field(None, gt=0)
    eps_max: Optional[float] = Field(None, gt=0)
    n_eps: int = Field(13, ge=3)


class ControlConfig(_Section):
    desired: Optional[InputSpec] = None
    swing: Optional[float] = Field(None, gt=0, description="Peak-to-peak sine swing (V)")
    frequency_hz: Optional[float] = Field(None, gt=0)
    periods: float = Field(1.0, gt=0)
    offset: float = 0.0
    vin_rate_cap: Optional[float] = Field(None, gt=0)


class PinConfig(_Section):
    level: float = 0.0
    hold: Optional[float] = Field(None, ge=0, description="Hold time; defaults to 25·τ2")
    release_delta: float = Field(1e-7, gt=0, description="Magnitude of the ± release offsets")
    vin_rate_cap: Optional[float] = Field(None, gt=0)


class FitConfig(_Section):
    level: float = 0.0
    deltas: List[float] = Field(
        default_factory=lambda: [10.0**-e for e in range(12, 5, -1)], min_length=3
    )


class ScenarioConfig(_Section):
    input: Optional[InputSpec] = None
    v_out0: Optional[float] = Field(None, description="Initial output; defaults to the high rail")
    thresholds: List[float] = Field(default_factory=list)
    grid: GridConfig = Field(default_factory=GridConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    control: ControlConfig = Field(default_factory=ControlConfig)
    pin: PinConfig = Field(default_factory=PinConfig)
    fit: FitConfig = Field(default_factory=FitConfig)


# ============================================================================
# Run and output sections
# ============================================================================


class RunSection(_Section):
    span: Optional[Tuple[float, float]] = None
    tol: Optional[float] = Field(None, gt=0, le=1e-3)
    output_points: Optional[int] = Field(None, ge=2)
    precision: Optional[Literal["double", "extended"]] = Field(
        None, description="Arithmetic mode; pin and fit-tau default to extended"
    )
    workers: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def check_span(self) -> "RunSection":
        if self.span is not None and not self.span[1] > self.span[0]:
            raise ValueError("run.span must be [t0, t1] with t1 > t0")
        return self


class OutputSection(_Section):
    dir: str = "out"
    formats: List[Literal["csv", "json", "svg"]] = Field(default_factory=lambda: ["csv", "json"])


class RunConfig(_Section):
    """Complete description of one CLI or API run."""

    model: ModelConfig
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    run: RunSection = Field(default_factory=RunSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def effective(self) -> Dict[str, Any]:
        """JSON-ready dump that loads back into an equal RunConfig."""
        return self.model_dump(mode="json", by_alias=True)


# ============================================================================
# Loading
# ============================================================================


def parse_override(item: str) -> Tuple[List[str], Any]:
    """
    Split `a.b.c=value` into a key path and a YAML-parsed value.

    Raises:
        ConfigError: Missing `=` or empty key
    """
    key, sep, raw = item.partition("=")
    path = [part for part in key.strip().split(".")]
    if not sep or not key.strip() or any(not part for part in path):
        raise ConfigError(f"Override must look like KEY=VALUE, got {item!r}")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse override value {raw!r}: {e}")
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a dot (1e-9) as strings
        try:
            value = float(value)
        except ValueError:
            pass
    return path, value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Set dotted-key overrides on a nested dict, creating sections as needed."""
    for item in overrides:
        path, value = parse_override(item)
        node = data
        for part in path[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            elif not isinstance(child, dict):
                raise ConfigError(
                    f"Override {item!r} descends into non-mapping key {part!r}"
                )
            node = child
        node[path[-1]] = value
        logger.debug(f"Override {'.'.join(path)} = {value!r}")
    return data


def _resolve_paths(data: Dict[str, Any], base: Path) -> None:
    spec = (data.get("scenario") or {}).get("input")
    if isinstance(spec, dict) and spec.get("kind") == "csv" and spec.get("path"):
        path = Path(spec["path"])
        if not path.is_absolute():
            spec["path"] = str((base / path).resolve())


def validate_run_config(data: Dict[str, Any]) -> RunConfig:
    """
    Validate a raw mapping.

    Raises:
        ModelParameterError: Errors located in the model section
        ConfigError: Any other validation error
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        errors = e.errors(include_url=False, include_context=False)
        details = {
            "errors": [
                {"loc": ".".join(str(p) for p in err["loc"]), "msg": err["msg"]}
                for err in errors
            ]
        }
        if all(err["loc"] and err["loc"][0] == "model" for err in errors):
            raise ModelParameterError("Invalid model parameters", details=details)
        raise ConfigError("Invalid run configuration", details=details)


def load_run_config(path: Union[str, Path], overrides: Sequence[str] = ()) -> RunConfig:
    """
    Read a YAML/JSON run configuration and apply dotted overrides.

    Relative waveform file paths are resolved against the configuration
    file's directory.

    Raises:
        ConfigError: Unreadable file, malformed YAML or invalid content
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {path}: {e}", details={"path": str(path)})
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed configuration {path}: {e}", details={"path": str(path)})
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration {path} must be a mapping")

    apply_overrides(data, overrides)
    _resolve_paths(data, path.parent)
    config = validate_run_config(data)
    logger.info(f"Loaded {config.model.kind} run configuration from {path}")
    return config
