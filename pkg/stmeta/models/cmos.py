"""Square-law CMOS Schmitt-Trigger models."""

from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class MosfetParams(BaseModel):
    """Level-1 (square-law) device parameters."""

    polarity: Literal["n", "p"]
    v_th: float = Field(0.3, gt=0, description="Threshold voltage magnitude (V)")
    beta: float = Field(..., gt=0, description="Transconductance factor (A/V²)")
    lambda_: float = Field(0.0, ge=0, alias="lambda", description="Channel-length modulation (1/V)")

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)


def _nmos(beta: float) -> MosfetParams:
    return MosfetParams(polarity="n", v_th=0.3, beta=beta)


def _pmos(beta: float) -> MosfetParams:
    return MosfetParams(polarity="p", v_th=0.3, beta=beta)


class CmosStModel(BaseModel):
    """
    Six-transistor CMOS Schmitt-Trigger.

    m1/m2: NMOS input stack (GND - m1 - x_n - m2 - out), gates at V_in.
    m4/m5: PMOS input stack (VDD - m4 - x_p - m5 - out), gates at V_in.
    m3: NMOS feedback from VDD to x_n, gate at V_out.
    m6: PMOS feedback from x_p to GND, gate at V_out.
    """

    m1: MosfetParams = Field(default_factory=lambda: _nmos(2e-5))
    m2: MosfetParams = Field(default_factory=lambda: _nmos(2e-5))
    m3: MosfetParams = Field(default_factory=lambda: _nmos(2e-5))
    m4: MosfetParams = Field(default_factory=lambda: _pmos(1e-5))
    m5: MosfetParams = Field(default_factory=lambda: _pmos(1e-5))
    m6: MosfetParams = Field(default_factory=lambda: _pmos(1e-5))
    vdd: float = Field(1.2, gt=0)
    c_load: float = Field(2e-15, gt=0)
    gmin: float = Field(1e-12, ge=0, description="Drain-source shunt conductance (S)")

    model_config = ConfigDict(frozen=True, extra="forbid")

    @classmethod
    def symmetric(
        cls, beta: float = 1e-5, v_th: float = 0.3, vdd: float = 1.2, **kwargs
    ) -> "CmosStModel":
        """Model with identical N and P devices (mirror-symmetric about VDD/2)."""
        n = MosfetParams(polarity="n", v_th=v_th, beta=beta)
        p = MosfetParams(polarity="p", v_th=v_th, beta=beta)
        return cls(m1=n, m2=n, m3=n, m4=p, m5=p, m6=p, vdd=vdd, **kwargs)


class PhaseMap(BaseModel):
    """dV_out/dt over a (V_in, V_out) grid plus traced rest curves."""

    v_in: np.ndarray
    v_out: np.ndarray
    field: np.ndarray = Field(..., description="shape (len(v_out), len(v_in))")
    curves: dict = Field(default_factory=dict, description="name -> (N, 2) array of (v_in, v_out)")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    def rows(self) -> List[tuple]:
        """Rows `(v_in, v_out, dvout_dt)` in row-major order."""
        out = []
        for j, vo in enumerate(self.v_out):
            for i, vi in enumerate(self.v_in):
                out.append((float(vi), float(vo), float(self.field[j, i])))
        return out
