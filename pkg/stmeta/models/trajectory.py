"""Simulated trajectory models."""

from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from stmeta.models.st_model import Region


class TrajectoryEvent(BaseModel):
    """Region crossing or threshold crossing located during integration."""

    t: float
    kind: Literal["region_cross", "threshold_cross"]
    from_region: Optional[Region] = None
    to_region: Optional[Region] = None
    v_th: Optional[float] = None
    direction: Optional[Literal[-1, 1]] = None

    model_config = ConfigDict(frozen=True)


class Trajectory(BaseModel):
    """
    Samples (t, V_in, V_out, region) in strictly increasing time plus events.

    Sample arrays are numpy vectors of equal length; region tags are stored as
    a tuple aligned with the samples.
    """

    t: np.ndarray
    v_in: np.ndarray
    v_out: np.ndarray
    regions: Tuple[Region, ...]
    events: List[TrajectoryEvent] = Field(default_factory=list)

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def check_samples(self) -> "Trajectory":
        """Arrays aligned and time strictly increasing."""
        n = len(self.t)
        if not (len(self.v_in) == len(self.v_out) == len(self.regions) == n):
            raise ValueError("sample arrays must have equal length")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("sample times must be strictly increasing")
        return self

    def __len__(self) -> int:
        return len(self.t)

    def region_crossings(self) -> List[TrajectoryEvent]:
        """Region-crossing events in time order."""
        return [e for e in self.events if e.kind == "region_cross"]

    def threshold_crossings(self, v_th: Optional[float] = None) -> List[TrajectoryEvent]:
        """Threshold-crossing events, optionally filtered by level."""
        return [
            e
            for e in self.events
            if e.kind == "threshold_cross" and (v_th is None or e.v_th == v_th)
        ]

    def first_event(
        self, kind: Literal["region_cross", "threshold_cross"], after: float = -np.inf
    ) -> Optional[TrajectoryEvent]:
        """First event of the given kind at or after `after`."""
        return next((e for e in self.events if e.kind == kind and e.t >= after), None)

    def crossing_time(self, v_th: float, after: float = -np.inf) -> Optional[float]:
        """
        First time at or after `after` where V_out crosses `v_th`.

        Linear interpolation between consecutive samples; None when the
        trajectory never reaches the level.
        """
        mask = self.t >= after
        t = self.t[mask]
        v = self.v_out[mask] - v_th
        if len(t) == 0:
            return None
        if v[0] == 0.0:
            return float(t[0])
        sign_change = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) <= 0)[0]
        if len(sign_change) == 0:
            return None
        i = int(sign_change[0])
        if v[i + 1] == v[i]:
            return float(t[i])
        frac = v[i] / (v[i] - v[i + 1])
        return float(t[i] + frac * (t[i + 1] - t[i]))

    def window(self, t0: float, t1: float) -> "Trajectory":
        """Sub-trajectory with samples in [t0, t1]."""
        mask = (self.t >= t0) & (self.t <= t1)
        idx = np.nonzero(mask)[0]
        return Trajectory(
            t=self.t[mask],
            v_in=self.v_in[mask],
            v_out=self.v_out[mask],
            regions=tuple(self.regions[i] for i in idx),
            events=[e for e in self.events if t0 <= e.t <= t1],
        )

    def to_csv_rows(self) -> List[Tuple[float, float, float, int]]:
        """Rows `(t, v_in, v_out, region_number)` for CSV export."""
        return [
            (float(t), float(vi), float(vo), r.number)
            for t, vi, vo, r in zip(self.t, self.v_in, self.v_out, self.regions)
        ]

    def events_json(self) -> List[Dict[str, Any]]:
        """Events as plain dicts (JSON sidecar)."""
        return [e.model_dump(mode="json", exclude_none=True) for e in self.events]
