"""Delay analysis and sweep result models."""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from stmeta.models.st_model import Geometry


class DelaySpec(BaseModel):
    """
    Downstream threshold placed a fraction `sigma` of the swing above γ3.

    V_th = γ3 + σ·(γ1 − γ3); the delay is measured until V_out reaches V_th.
    """

    sigma: float = Field(..., gt=0, lt=1)

    model_config = ConfigDict(frozen=True, extra="forbid")

    def v_th(self, geometry: Geometry) -> float:
        """Threshold voltage for the given geometry."""
        return geometry.gamma3 + self.sigma * (geometry.gamma1 - geometry.gamma3)


class DelayPrediction(BaseModel):
    """Closed-form delay components."""

    d2: float = Field(..., description="Transit time through the linear region (s)")
    d3: float = Field(..., description="Decay time in negative saturation (s)")
    total: float

    model_config = ConfigDict(frozen=True)


class SweepRow(BaseModel):
    """One overdrive value of a delay sweep."""

    epsilon: float
    d2_pred: float
    d3_pred: float
    total_pred: float
    measured: float

    model_config = ConfigDict(frozen=True)


class SweepResult(BaseModel):
    """Delay sweep over overdrive values, ordered by epsilon."""

    rows: List[SweepRow]

    model_config = ConfigDict(frozen=True)

    @property
    def epsilons(self) -> List[float]:
        return [r.epsilon for r in self.rows]

    @property
    def measured(self) -> List[float]:
        return [r.measured for r in self.rows]


class MonotonicityVerdict(BaseModel):
    """Outcome of the sample-to-sample monotonicity check."""

    verdict: Literal["strictly_monotone", "monotone_with_plateaus", "non_monotone"]
    direction: Optional[Literal[-1, 1]] = None
    t_witness: Optional[float] = None

    model_config = ConfigDict(frozen=True)

    @property
    def is_monotone(self) -> bool:
        return self.verdict != "non_monotone"


class LogLawFit(BaseModel):
    """Ordinary least squares of delay against ln(1/x)."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int

    model_config = ConfigDict(frozen=True)


class ResolutionFit(BaseModel):
    """Resolution time constant recovered from pinned-release simulations."""

    tau_fit: float
    r_squared: float
    deltas: List[float]
    exit_times: List[float]

    model_config = ConfigDict(frozen=True)
