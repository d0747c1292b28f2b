"""Inverse-control plan models."""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field

from stmeta.models.waveform import Waveform


class InfeasibleInterval(BaseModel):
    """Sub-interval where a plan violates a dynamic limit."""

    t_start: float
    t_end: float
    reason: Literal["amplifier_saturation", "input_rate_cap"]

    model_config = ConfigDict(frozen=True)


class SegmentFeasibility(BaseModel):
    """Feasibility report for one desired-output segment."""

    index: int
    t_start: float
    t_end: float
    amp_margin: float = Field(
        ..., description="M − max|W + τ0·W'|; positive when the amplifier stays linear"
    )
    max_vin_slope: float = Field(..., description="sup |dV_in/dt| required (V/s)")
    feasible: bool
    violations: List[InfeasibleInterval] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)


class ControlPlan(BaseModel):
    """Desired output, the synthesized input and its feasibility."""

    desired_output: Waveform
    synthesized_input: Waveform
    feasibility: List[SegmentFeasibility]
    vin_rate_cap: Optional[float] = Field(None, gt=0)
    span: List[float]

    model_config = ConfigDict(frozen=True)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def feasible(self) -> bool:
        return all(seg.feasible for seg in self.feasibility)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def violations(self) -> List[InfeasibleInterval]:
        return [v for seg in self.feasibility for v in seg.violations]


class TrackingReport(BaseModel):
    """Closed-loop re-integration of a plan against its desired output."""

    max_error: float
    rms_error: float
    max_corridor_distance: float = Field(
        ..., description="max horizontal distance of the phase trace from γ2 (V)"
    )
    corridor_halfwidth: float

    model_config = ConfigDict(frozen=True)
