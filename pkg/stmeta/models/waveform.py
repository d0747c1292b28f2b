"""
Input waveform models.

A waveform is an ordered list of analytic segments. Each segment is active
from its `t_start` up to the next segment's `t_start` (or the waveform's
`t_end`). Ramp, Sine and Exp segments are parameterized in local time
τ = t − t_start.
"""

from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ConstantSegment(BaseModel):
    """V_in(τ) = level."""

    kind: Literal["constant"] = "constant"
    t_start: float
    level: float

    model_config = ConfigDict(frozen=True, extra="forbid")


class RampSegment(BaseModel):
    """V_in(τ) = v0 + slope·τ."""

    kind: Literal["ramp"] = "ramp"
    t_start: float
    v0: float
    slope: float

    model_config = ConfigDict(frozen=True, extra="forbid")


class SineSegment(BaseModel):
    """V_in(τ) = offset + amplitude·sin(2π·f·τ + phase)."""

    kind: Literal["sine"] = "sine"
    t_start: float
    offset: float
    amplitude: float
    frequency_hz: float = Field(..., gt=0)
    phase: float = 0.0

    model_config = ConfigDict(frozen=True, extra="forbid")


class ExpSegment(BaseModel):
    """
    V_in(τ) = v_inf + (v0 − v_inf)·exp(sign·τ/tau).

    sign = −1 decays from v0 towards v_inf, sign = +1 grows away from v_inf.
    """

    kind: Literal["exp"] = "exp"
    t_start: float
    v_inf: float
    v0: float
    tau: float = Field(..., gt=0)
    sign: Literal[-1, 1] = -1

    model_config = ConfigDict(frozen=True, extra="forbid")


Segment = Annotated[
    Union[ConstantSegment, RampSegment, SineSegment, ExpSegment],
    Field(discriminator="kind"),
]


class Waveform(BaseModel):
    """Piecewise-analytic input signal."""

    segments: List[Segment] = Field(..., min_length=1)
    t_end: Optional[float] = Field(
        None, description="End of the defined span; open-ended when omitted"
    )

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def check_ordering(self) -> "Waveform":
        """Segments must start at strictly increasing times."""
        starts = [seg.t_start for seg in self.segments]
        for earlier, later in zip(starts, starts[1:]):
            if not later > earlier:
                raise ValueError("segments must have strictly increasing t_start")
        if self.t_end is not None and not self.t_end > starts[-1]:
            raise ValueError("t_end must lie after the last segment start")
        return self

    @property
    def t_start(self) -> float:
        """Start of the defined span."""
        return self.segments[0].t_start

    def segment_end(self, index: int) -> float:
        """End time of segment `index` (inf for an open-ended last segment)."""
        if index + 1 < len(self.segments):
            return self.segments[index + 1].t_start
        return self.t_end if self.t_end is not None else float("inf")
