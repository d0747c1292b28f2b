"""Construction, evaluation and inspection of input waveforms."""

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from stmeta.core.errors import WaveformError
from stmeta.models.waveform import (
    ConstantSegment,
    ExpSegment,
    RampSegment,
    Segment,
    SineSegment,
    Waveform,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Jumps smaller than this (relative to the signal scale) are not reported
JOINT_TOLERANCE = 1e-12


# ============================================================================
# Segment primitives
# ============================================================================


def segment_value(seg: Segment, tau: ArrayLike) -> ArrayLike:
    """Value of a segment at local time τ = t − t_start."""
    if isinstance(seg, ConstantSegment):
        return np.full(np.shape(tau), seg.level) if np.ndim(tau) else seg.level
    if isinstance(seg, RampSegment):
        return seg.v0 + seg.slope * tau
    if isinstance(seg, SineSegment):
        return seg.offset + seg.amplitude * np.sin(
            2.0 * np.pi * seg.frequency_hz * tau + seg.phase
        )
    if isinstance(seg, ExpSegment):
        return seg.v_inf + (seg.v0 - seg.v_inf) * np.exp(seg.sign * tau / seg.tau)
    raise WaveformError(f"Unknown segment kind: {type(seg).__name__}")


def segment_derivative(seg: Segment, tau: ArrayLike) -> ArrayLike:
    """Analytic dV/dt of a segment at local time τ."""
    if isinstance(seg, ConstantSegment):
        return np.zeros(np.shape(tau)) if np.ndim(tau) else 0.0
    if isinstance(seg, RampSegment):
        return np.full(np.shape(tau), seg.slope) if np.ndim(tau) else seg.slope
    if isinstance(seg, SineSegment):
        omega = 2.0 * np.pi * seg.frequency_hz
        return seg.amplitude * omega * np.cos(omega * tau + seg.phase)
    if isinstance(seg, ExpSegment):
        rate = seg.sign / seg.tau
        return (seg.v0 - seg.v_inf) * rate * np.exp(rate * tau)
    raise WaveformError(f"Unknown segment kind: {type(seg).__name__}")


def _check_span(w: Waveform, t: np.ndarray) -> None:
    if np.any(t < w.t_start) or (w.t_end is not None and np.any(t > w.t_end)):
        lo, hi = float(np.min(t)), float(np.max(t))
        raise WaveformError(
            f"Query [{lo:g}, {hi:g}] s outside waveform span "
            f"[{w.t_start:g}, {w.t_end if w.t_end is not None else math.inf:g}] s",
            details={"t_min": lo, "t_max": hi},
        )


def segment_index(w: Waveform, t: float) -> int:
    """Index of the segment active at time t (later segment wins at a joint)."""
    _check_span(w, np.asarray(t, dtype=float))
    starts = [seg.t_start for seg in w.segments]
    return int(np.searchsorted(starts, t, side="right") - 1)


def _apply(w: Waveform, t: ArrayLike, func) -> ArrayLike:
    t_arr = np.asarray(t, dtype=float)
    _check_span(w, t_arr)
    starts = np.array([seg.t_start for seg in w.segments])
    if t_arr.ndim == 0:
        i = int(np.searchsorted(starts, t_arr, side="right") - 1)
        seg = w.segments[i]
        return float(func(seg, float(t_arr) - seg.t_start))
    idx = np.searchsorted(starts, t_arr, side="right") - 1
    out = np.empty_like(t_arr)
    for i in np.unique(idx):
        seg = w.segments[int(i)]
        mask = idx == i
        out[mask] = func(seg, t_arr[mask] - seg.t_start)
    return out


def evaluate(w: Waveform, t: ArrayLike) -> ArrayLike:
    """
    Exact value of the waveform at time(s) t.

    Raises:
        WaveformError: When t lies outside the defined span
    """
    return _apply(w, t, segment_value)


def derivative(w: Waveform, t: ArrayLike) -> ArrayLike:
    """Analytic dV_in/dt at time(s) t (right derivative at joints)."""
    return _apply(w, t, segment_derivative)


# ============================================================================
# Builders
# ============================================================================


def constant(level: float, t_start: float = 0.0) -> Waveform:
    """Open-ended constant input."""
    return Waveform(segments=[ConstantSegment(t_start=t_start, level=level)])


def step_to(
    level_before: float, level_after: float, t_step: float, t_start: float = 0.0
) -> Waveform:
    """Constant `level_before`, stepping to `level_after` at `t_step`."""
    if t_step < t_start:
        raise WaveformError(f"Step time {t_step:g} s precedes waveform start {t_start:g} s")
    if t_step == t_start:
        return constant(level_after, t_start)
    return Waveform(
        segments=[
            ConstantSegment(t_start=t_start, level=level_before),
            ConstantSegment(t_start=t_step, level=level_after),
        ]
    )


def ramp_and_hold(
    v0: float, slope: float, v_stop: float, t_start: float = 0.0
) -> Waveform:
    """
    Ramp from v0 at `slope` until `v_stop`, then hold.

    Raises:
        WaveformError: If the ramp runs away from `v_stop`
    """
    if v_stop == v0:
        return constant(v0, t_start)
    if slope == 0.0 or math.copysign(1.0, slope) != math.copysign(1.0, v_stop - v0):
        raise WaveformError(
            f"Ramp slope {slope:g} V/s never reaches v_stop={v_stop:g} V from v0={v0:g} V",
            details={"v0": v0, "slope": slope, "v_stop": v_stop},
        )
    t_hold = t_start + (v_stop - v0) / slope
    return Waveform(
        segments=[
            RampSegment(t_start=t_start, v0=v0, slope=slope),
            ConstantSegment(t_start=t_hold, level=v_stop),
        ]
    )


def latch_resolution_input(
    v_meta: float,
    v_rail: float,
    tau_c: float,
    t_onset: float,
    t_start: float = 0.0,
) -> Waveform:
    """
    Input produced by a latch leaving its metastable voltage.

    Holds `v_meta` until `t_onset`, then grows exponentially with time
    constant `tau_c`, reaching `v_rail` after 5·tau_c, and holds the rail.
    """
    if tau_c <= 0:
        raise WaveformError(f"tau_c must be positive, got {tau_c:g}")
    if t_onset < t_start:
        raise WaveformError(f"Onset {t_onset:g} s precedes waveform start {t_start:g} s")
    if v_rail == v_meta:
        return constant(v_meta, t_start)

    delta0 = (v_rail - v_meta) / math.expm1(5.0)
    segments: List[Segment] = []
    if t_onset > t_start:
        segments.append(ConstantSegment(t_start=t_start, level=v_meta))
    segments.append(
        ExpSegment(t_start=t_onset, v_inf=v_meta - delta0, v0=v_meta, tau=tau_c, sign=1)
    )
    segments.append(ConstantSegment(t_start=t_onset + 5.0 * tau_c, level=v_rail))
    return Waveform(segments=segments)


def sine(
    offset: float,
    amplitude: float,
    frequency_hz: float,
    phase: float = 0.0,
    t_start: float = 0.0,
    t_end: Optional[float] = None,
) -> Waveform:
    """Single sine segment."""
    return Waveform(
        segments=[
            SineSegment(
                t_start=t_start,
                offset=offset,
                amplitude=amplitude,
                frequency_hz=frequency_hz,
                phase=phase,
            )
        ],
        t_end=t_end,
    )


def square_wave(
    low: float,
    high: float,
    period: float,
    n_periods: int,
    t_start: float = 0.0,
    duty: float = 0.5,
    start_high: bool = False,
) -> Waveform:
    """Full-swing square wave of `n_periods` periods."""
    if period <= 0 or n_periods < 1 or not 0.0 < duty < 1.0:
        raise WaveformError(
            "square_wave needs period > 0, n_periods >= 1 and 0 < duty < 1",
            details={"period": period, "n_periods": n_periods, "duty": duty},
        )
    first, second = (high, low) if start_high else (low, high)
    segments: List[Segment] = []
    for n in range(n_periods):
        t0 = t_start + n * period
        segments.append(ConstantSegment(t_start=t0, level=first))
        segments.append(ConstantSegment(t_start=t0 + duty * period, level=second))
    return Waveform(segments=segments, t_end=t_start + n_periods * period)


def staircase(levels: Sequence[float], dwell: float, t_start: float = 0.0) -> Waveform:
    """Constant steps of equal duration `dwell`."""
    if not levels or dwell <= 0:
        raise WaveformError("staircase needs at least one level and dwell > 0")
    segments = [
        ConstantSegment(t_start=t_start + i * dwell, level=float(level))
        for i, level in enumerate(levels)
    ]
    return Waveform(segments=segments, t_end=t_start + len(levels) * dwell)


def _shift(seg: Segment, dt: float) -> Segment:
    return seg.model_copy(update={"t_start": seg.t_start + dt})


def then(w: Waveform, other: Waveform, t_join: float) -> Waveform:
    """
    Follow `w` until `t_join`, then play `other` shifted to start at `t_join`.

    Local-time parameterization makes the shift exact.
    """
    if t_join <= w.t_start:
        raise WaveformError(f"Join time {t_join:g} s must follow waveform start {w.t_start:g} s")
    if w.t_end is not None and t_join > w.t_end:
        raise WaveformError(f"Join time {t_join:g} s beyond waveform end {w.t_end:g} s")
    head = [seg for seg in w.segments if seg.t_start < t_join]
    dt = t_join - other.t_start
    tail = [_shift(seg, dt) for seg in other.segments]
    t_end = other.t_end + dt if other.t_end is not None else None
    return Waveform(segments=head + tail, t_end=t_end)


# ============================================================================
# Import / export
# ============================================================================


def from_points(points: Iterable[Tuple[float, float]]) -> Waveform:
    """Piecewise-linear waveform through `(t, v)` breakpoints, holding the last value."""
    pts = [(float(t), float(v)) for t, v in points]
    if not pts:
        raise WaveformError("Waveform needs at least one breakpoint")
    for (t0, _), (t1, _) in zip(pts, pts[1:]):
        if not t1 > t0:
            raise WaveformError(f"Breakpoint times must increase strictly ({t0:g} -> {t1:g})")

    segments: List[Segment] = []
    for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
        if v1 == v0:
            segments.append(ConstantSegment(t_start=t0, level=v0))
        else:
            segments.append(RampSegment(t_start=t0, v0=v0, slope=(v1 - v0) / (t1 - t0)))
    t_last, v_last = pts[-1]
    segments.append(ConstantSegment(t_start=t_last, level=v_last))
    return Waveform(segments=segments)


def from_csv(path: Union[str, Path]) -> Waveform:
    """
    Load a `t,v` CSV file (header required) as a piecewise-linear waveform.

    Raises:
        WaveformError: Missing file, wrong header or unparsable rows
    """
    path = Path(path)
    if not path.is_file():
        raise WaveformError(f"Waveform file not found: {path}", details={"path": str(path)})

    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header != ["t", "v"]:
            raise WaveformError(
                f"Waveform CSV header must be 't,v', got {','.join(header)!r}",
                details={"path": str(path)},
            )
        points = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                points.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError) as e:
                raise WaveformError(
                    f"Bad waveform row at {path}:{line_no}: {row}",
                    details={"path": str(path), "line": line_no},
                ) from e

    logger.info(f"Loaded {len(points)} waveform breakpoints from {path}")
    return from_points(points)


def to_records(w: Waveform, times: Optional[Sequence[float]] = None) -> List[Tuple[float, float]]:
    """
    `(t, v)` records at the given times, or at the segment starts and `t_end`.

    For piecewise-linear waveforms the default records reload exactly via
    `from_points`.
    """
    if times is None:
        times = [seg.t_start for seg in w.segments]
        if w.t_end is not None:
            times.append(w.t_end)
    values = evaluate(w, np.asarray(times, dtype=float))
    return [(float(t), float(v)) for t, v in zip(times, np.atleast_1d(values))]


# ============================================================================
# Inspection
# ============================================================================


def _scale(w: Waveform) -> float:
    levels = []
    for seg in w.segments:
        levels.extend(abs(float(x)) for x in _segment_levels(seg))
    return max(levels + [1.0])


def _segment_levels(seg: Segment) -> Tuple[float, ...]:
    if isinstance(seg, ConstantSegment):
        return (seg.level,)
    if isinstance(seg, RampSegment):
        return (seg.v0,)
    if isinstance(seg, SineSegment):
        return (seg.offset, seg.amplitude)
    return (seg.v0, seg.v_inf)


def joint_discontinuities(w: Waveform) -> List[Tuple[float, float]]:
    """Value jumps `(t_join, v_after − v_before)` at segment joints."""
    tol = JOINT_TOLERANCE * _scale(w)
    jumps = []
    for prev, seg in zip(w.segments, w.segments[1:]):
        before = float(segment_value(prev, seg.t_start - prev.t_start))
        after = float(segment_value(seg, 0.0))
        if abs(after - before) > tol:
            jumps.append((seg.t_start, after - before))
    return jumps


def _windows(w: Waveform, t0: float, t1: float):
    """Yield (segment, tau_lo, tau_hi) for segments overlapping [t0, t1]."""
    for i, seg in enumerate(w.segments):
        lo = max(t0, seg.t_start)
        hi = min(t1, w.segment_end(i))
        if hi > lo:
            yield seg, lo - seg.t_start, hi - seg.t_start


def _cos_range(theta0: float, theta1: float) -> Tuple[float, float]:
    """(min, max) of cos over [theta0, theta1]."""
    ends = (math.cos(theta0), math.cos(theta1))
    lo, hi = min(ends), max(ends)
    two_pi = 2.0 * math.pi
    if math.pi + two_pi * math.ceil((theta0 - math.pi) / two_pi) <= theta1:
        lo = -1.0
    if two_pi * math.ceil(theta0 / two_pi) <= theta1:
        hi = 1.0
    return lo, hi


def is_non_decreasing(w: Waveform, t0: Optional[float] = None, t1: Optional[float] = None) -> bool:
    """
    True when the waveform never decreases over [t0, t1].

    Uses analytic derivatives per segment plus the sign of joint jumps.
    """
    t0 = w.t_start if t0 is None else t0
    t1 = (w.t_end if w.t_end is not None else math.inf) if t1 is None else t1
    tol = JOINT_TOLERANCE * _scale(w)

    for t_join, jump in joint_discontinuities(w):
        if t0 < t_join <= t1 and jump < -tol:
            return False

    for seg, lo, hi in _windows(w, t0, t1):
        if isinstance(seg, RampSegment) and seg.slope < 0:
            return False
        if isinstance(seg, ExpSegment) and seg.sign * (seg.v0 - seg.v_inf) < 0:
            return False
        if isinstance(seg, SineSegment) and seg.amplitude != 0.0:
            if math.isinf(hi):
                return False
            omega = 2.0 * math.pi * seg.frequency_hz
            c_lo, c_hi = _cos_range(omega * lo + seg.phase, omega * hi + seg.phase)
            if (seg.amplitude > 0 and c_lo < 0) or (seg.amplitude < 0 and c_hi > 0):
                return False
    return True


def max_slope(w: Waveform, t0: Optional[float] = None, t1: Optional[float] = None) -> float:
    """Analytic sup |dV_in/dt| over [t0, t1]; joints are excluded."""
    t0 = w.t_start if t0 is None else t0
    t1 = (w.t_end if w.t_end is not None else math.inf) if t1 is None else t1
    best = 0.0
    for seg, lo, hi in _windows(w, t0, t1):
        if isinstance(seg, RampSegment):
            best = max(best, abs(seg.slope))
        elif isinstance(seg, SineSegment):
            omega = 2.0 * math.pi * seg.frequency_hz
            if math.isinf(hi):
                peak = 1.0
            else:
                c_lo, c_hi = _cos_range(omega * lo + seg.phase, omega * hi + seg.phase)
                peak = max(abs(c_lo), abs(c_hi))
            best = max(best, abs(seg.amplitude) * omega * peak)
        elif isinstance(seg, ExpSegment) and seg.v0 != seg.v_inf:
            tau_at = hi if seg.sign > 0 else lo
            if math.isinf(tau_at):
                return math.inf
            best = max(best, abs(float(segment_derivative(seg, tau_at))))
    return best


def value_range(w: Waveform, t0: Optional[float] = None, t1: Optional[float] = None) -> Tuple[float, float]:
    """Analytic (min, max) of the waveform over [t0, t1]."""
    t0 = w.t_start if t0 is None else t0
    t1 = (w.t_end if w.t_end is not None else math.inf) if t1 is None else t1
    lo_all, hi_all = math.inf, -math.inf
    for seg, lo, hi in _windows(w, t0, t1):
        if isinstance(seg, SineSegment):
            if math.isinf(hi):
                s_lo, s_hi = -1.0, 1.0
            else:
                omega = 2.0 * math.pi * seg.frequency_hz
                # sin(x) = cos(x − π/2)
                s_lo, s_hi = _cos_range(
                    omega * lo + seg.phase - math.pi / 2, omega * hi + seg.phase - math.pi / 2
                )
            ends = (seg.offset + seg.amplitude * s_lo, seg.offset + seg.amplitude * s_hi)
        else:
            ends = (float(segment_value(seg, lo)), float(segment_value(seg, hi)))
        lo_all = min(lo_all, *ends)
        hi_all = max(hi_all, *ends)
    return lo_all, hi_all
