"""Domain models for the Schmitt-Trigger toolkit."""

from stmeta.models.analysis import (
    DelayPrediction,
    DelaySpec,
    LogLawFit,
    MonotonicityVerdict,
    ResolutionFit,
    SweepResult,
    SweepRow,
)
from stmeta.models.cmos import CmosStModel, MosfetParams, PhaseMap
from stmeta.models.control import (
    ControlPlan,
    InfeasibleInterval,
    SegmentFeasibility,
    TrackingReport,
)
from stmeta.models.st_model import Geometry, Region, StModel
from stmeta.models.trajectory import Trajectory, TrajectoryEvent
from stmeta.models.waveform import (
    ConstantSegment,
    ExpSegment,
    RampSegment,
    Segment,
    SineSegment,
    Waveform,
)

__all__ = [
    # Model parameters
    "StModel",
    "Geometry",
    "Region",
    # Waveforms
    "Waveform",
    "Segment",
    "ConstantSegment",
    "RampSegment",
    "SineSegment",
    "ExpSegment",
    # Trajectories
    "Trajectory",
    "TrajectoryEvent",
    # Analysis
    "DelaySpec",
    "DelayPrediction",
    "SweepRow",
    "SweepResult",
    "MonotonicityVerdict",
    "LogLawFit",
    "ResolutionFit",
    # Control
    "ControlPlan",
    "SegmentFeasibility",
    "InfeasibleInterval",
    "TrackingReport",
    # CMOS
    "MosfetParams",
    "CmosStModel",
    "PhaseMap",
]
