"""Clipped-linear Schmitt-Trigger model types."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Region(str, Enum):
    """Operating region of the clipped amplifier."""

    SATURATION_POS = "saturation_pos"
    LINEAR = "linear"
    SATURATION_NEG = "saturation_neg"

    @property
    def number(self) -> int:
        """Region number as drawn in the phase diagram (1, 2 or 3)."""
        return {"saturation_pos": 1, "linear": 2, "saturation_neg": 3}[self.value]


class StModel(BaseModel):
    """
    Parameters of the clipped-linear Schmitt-Trigger.

    The amplifier output is clip(A·((1−k)V_R + k·V_out − V_in), −M, +M),
    filtered by a single pole R0C0 at the output. The divider loading on the
    output node is neglected.
    """

    gain_a: float = Field(..., gt=0, description="Amplifier gain A")
    feedback_k: float = Field(..., gt=0, lt=1, description="Feedback fraction k")
    saturation_m: float = Field(..., gt=0, description="Saturation magnitude M (V)")
    ref_v: float = Field(0.0, description="Reference voltage V_R (V)")
    tau0: float = Field(..., gt=0, description="Output time constant R0C0 (s)")

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def check_bistable(self) -> "StModel":
        """Reject the discriminator regime k·A ≤ 1."""
        if self.gain_a * self.feedback_k <= 1.0:
            raise ValueError(
                f"discriminator regime: k*A = {self.gain_a * self.feedback_k:g} <= 1"
            )
        return self


class Geometry(BaseModel):
    """Rest lines, time constants and thresholds derived from an StModel."""

    gamma1: float
    gamma3: float
    tau1: float
    tau2: float
    tau3: float
    v_h: float
    v_l: float
    hysteresis: float
    gamma2_slope_alpha: float

    model_config = ConfigDict(frozen=True)
