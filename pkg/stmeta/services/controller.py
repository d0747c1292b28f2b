"""Inverse input synthesis: pinning, waveform forcing and corridor checks.

Inside the linear region the model can be inverted exactly: a desired output
W(t) is produced by V_in = (1−k)V_R + k·W − (W + τ0·W')/A as long as the
amplifier demand W + τ0·W' stays inside (−M, M).
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from stmeta.core.errors import ConfigError, InfeasibleError, NoCrossingError, OutOfRegionError
from stmeta.models.control import (
    ControlPlan,
    InfeasibleInterval,
    SegmentFeasibility,
    TrackingReport,
)
from stmeta.models.st_model import Region, StModel
from stmeta.models.trajectory import Trajectory
from stmeta.models.waveform import (
    ConstantSegment,
    ExpSegment,
    RampSegment,
    Segment,
    SineSegment,
    Waveform,
)
from stmeta.services import waveforms
from stmeta.services.integrator import Precision, integrate
from stmeta.services.st_model import derive_geometry, effective_gain, gamma2_inverse

logger = logging.getLogger(__name__)

# Grid used to report the extent of infeasible sub-intervals
FEASIBILITY_GRID = 4001

# Input slope of the pinning approach, as a fraction of the rate cap
APPROACH_FRACTION = 0.1

DEFAULT_RELEASE_DELTA = 1e-7


def _shift(model: StModel) -> float:
    return (1.0 - model.feedback_k) * model.ref_v


def _inverse(model: StModel, w: float, w_prime: float) -> float:
    return math.fsum(
        [
            _shift(model),
            model.feedback_k * w,
            -(w + model.tau0 * w_prime) / model.gain_a,
        ]
    )


def inverse_input(model: StModel, w: float, w_prime: float) -> float:
    """
    Input that puts the output at `w` moving with slope `w_prime`.

    Raises:
        InfeasibleError: When |w + τ0·w'| ≥ M (the amplifier would saturate)
    """
    demand = w + model.tau0 * w_prime
    if not abs(demand) < model.saturation_m:
        raise InfeasibleError(
            f"Amplifier demand {demand:g} V outside (-M, M)",
            details={"w": w, "w_prime": w_prime, "saturation_m": model.saturation_m},
        )
    return _inverse(model, w, w_prime)


def corridor_halfwidth(model: StModel, vin_rate_cap: float) -> float:
    """τ2·cap: widest horizontal distance from γ2 a rate-limited input can recover."""
    if vin_rate_cap < 0:
        raise ConfigError(f"Input rate cap must be non-negative, got {vin_rate_cap:g}")
    return derive_geometry(model).tau2 * vin_rate_cap


def vertical_distance(model: StModel, x: float) -> float:
    """α·X: vertical offset from γ2 of a point at horizontal distance X."""
    return derive_geometry(model).gamma2_slope_alpha * x


# ============================================================================
# Synthesis
# ============================================================================


def _inverse_segment(model: StModel, seg: Segment) -> Segment:
    """Analytic inverse of one desired-output segment."""
    kappa = effective_gain(model)
    a, tau0, shift = model.gain_a, model.tau0, _shift(model)
    if isinstance(seg, ConstantSegment):
        return ConstantSegment(t_start=seg.t_start, level=_inverse(model, seg.level, 0.0))
    if isinstance(seg, RampSegment):
        return RampSegment(
            t_start=seg.t_start, v0=_inverse(model, seg.v0, seg.slope), slope=kappa * seg.slope
        )
    if isinstance(seg, SineSegment):
        omega = 2.0 * math.pi * seg.frequency_hz
        lag = tau0 * omega / a
        return SineSegment(
            t_start=seg.t_start,
            offset=shift + kappa * seg.offset,
            amplitude=seg.amplitude * math.hypot(kappa, lag),
            frequency_hz=seg.frequency_hz,
            phase=seg.phase - math.atan2(lag, kappa),
        )
    if isinstance(seg, ExpSegment):
        v_inf = shift + kappa * seg.v_inf
        gain = kappa - tau0 * seg.sign / (a * seg.tau)
        return ExpSegment(
            t_start=seg.t_start,
            v_inf=v_inf,
            v0=v_inf + (seg.v0 - seg.v_inf) * gain,
            tau=seg.tau,
            sign=seg.sign,
        )
    raise ConfigError(f"No analytic derivative for segment kind {type(seg).__name__}")


def _demand_segment(model: StModel, seg: Segment) -> Segment:
    """Amplifier demand W + τ0·W' as a segment of the same kind."""
    tau0 = model.tau0
    if isinstance(seg, ConstantSegment):
        return seg
    if isinstance(seg, RampSegment):
        return RampSegment(t_start=seg.t_start, v0=seg.v0 + tau0 * seg.slope, slope=seg.slope)
    if isinstance(seg, SineSegment):
        lead = tau0 * 2.0 * math.pi * seg.frequency_hz
        return SineSegment(
            t_start=seg.t_start,
            offset=seg.offset,
            amplitude=seg.amplitude * math.hypot(1.0, lead),
            frequency_hz=seg.frequency_hz,
            phase=seg.phase + math.atan(lead),
        )
    if isinstance(seg, ExpSegment):
        return ExpSegment(
            t_start=seg.t_start,
            v_inf=seg.v_inf,
            v0=seg.v_inf + (seg.v0 - seg.v_inf) * (1.0 + tau0 * seg.sign / seg.tau),
            tau=seg.tau,
            sign=seg.sign,
        )
    raise ConfigError(f"No analytic derivative for segment kind {type(seg).__name__}")


def _intervals(t: np.ndarray, mask: np.ndarray) -> List[Tuple[float, float]]:
    """Contiguous runs of True in `mask` as (t_first, t_last)."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((float(t[start]), float(t[i - 1])))
            start = None
    if start is not None:
        runs.append((float(t[start]), float(t[-1])))
    return runs


def synthesize(
    model: StModel,
    desired: Waveform,
    span: Tuple[float, float],
    vin_rate_cap: Optional[float] = None,
) -> ControlPlan:
    """
    Feedforward input that makes the output follow `desired`.

    Each desired segment maps to an analytic input segment of the same kind.
    Feasibility is checked per segment: the amplifier demand must stay inside
    (−M, M) and, when a cap is given, |dV_in/dt| must not exceed it.
    Violating sub-intervals are reported on a uniform grid.

    Raises:
        ConfigError: Malformed span or a segment kind without analytic derivative
    """
    t0, t1 = float(span[0]), float(span[1])
    if not (math.isfinite(t0) and math.isfinite(t1) and t1 > t0):
        raise ConfigError(f"Malformed span [{t0}, {t1}]")
    if t0 < desired.t_start or (desired.t_end is not None and t1 > desired.t_end):
        raise ConfigError(f"Desired waveform does not cover [{t0:g}, {t1:g}] s")

    m = model.saturation_m
    synthesized = Waveform(
        segments=[_inverse_segment(model, seg) for seg in desired.segments],
        t_end=desired.t_end,
    )
    demand = Waveform(
        segments=[_demand_segment(model, seg) for seg in desired.segments],
        t_end=desired.t_end,
    )

    report: List[SegmentFeasibility] = []
    for i, seg in enumerate(desired.segments):
        a = max(t0, seg.t_start)
        b = min(t1, desired.segment_end(i))
        if b <= a:
            continue
        d_lo, d_hi = waveforms.value_range(demand, a, b)
        margin = m - max(abs(d_lo), abs(d_hi))
        slope = waveforms.max_slope(synthesized, a, b)

        grid = np.linspace(a, b, FEASIBILITY_GRID)
        violations = []
        if margin <= 0:
            bad = np.abs(waveforms.evaluate(demand, grid)) >= m
            violations += [
                InfeasibleInterval(t_start=lo, t_end=hi, reason="amplifier_saturation")
                for lo, hi in _intervals(grid, bad)
            ] or [InfeasibleInterval(t_start=a, t_end=b, reason="amplifier_saturation")]
        if vin_rate_cap is not None and slope > vin_rate_cap:
            bad = np.abs(waveforms.derivative(synthesized, grid)) > vin_rate_cap
            violations += [
                InfeasibleInterval(t_start=lo, t_end=hi, reason="input_rate_cap")
                for lo, hi in _intervals(grid, bad)
            ] or [InfeasibleInterval(t_start=a, t_end=b, reason="input_rate_cap")]

        feasible = not violations
        if not feasible:
            logger.warning(
                f"Segment {i} ({seg.kind}) infeasible on [{a:g}, {b:g}] s: "
                f"margin={margin:g} V, max |Vin'|={slope:g} V/s"
            )
        report.append(
            SegmentFeasibility(
                index=i,
                t_start=a,
                t_end=b,
                amp_margin=margin,
                max_vin_slope=slope,
                feasible=feasible,
                violations=violations,
            )
        )

    plan = ControlPlan(
        desired_output=desired,
        synthesized_input=synthesized,
        feasibility=report,
        vin_rate_cap=vin_rate_cap,
        span=[t0, t1],
    )
    logger.info(
        f"Synthesized {len(synthesized.segments)} input segment(s), feasible={plan.feasible}"
    )
    return plan


def closed_loop_check(
    model: StModel,
    plan: ControlPlan,
    tol: Optional[float] = None,
    output_points: Optional[int] = None,
) -> Tuple[Trajectory, TrackingReport]:
    """
    Re-integrate the synthesized input and compare with the desired output.

    The run starts on the desired output at the beginning of the span.

    Returns:
        (trajectory, report) with max/RMS tracking error and the largest
        horizontal distance of the phase trace from γ2
    """
    t0, t1 = plan.span
    v_out0 = waveforms.evaluate(plan.desired_output, t0)
    traj = integrate(
        model,
        plan.synthesized_input,
        v_out0,
        (t0, t1),
        tol=tol,
        output_points=output_points,
    )
    desired = waveforms.evaluate(plan.desired_output, traj.t)
    error = traj.v_out - desired
    kappa = effective_gain(model)
    horizontal = traj.v_in - (_shift(model) + kappa * traj.v_out)

    cap = plan.vin_rate_cap
    if cap is None:
        cap = waveforms.max_slope(plan.synthesized_input, t0, t1)
    report = TrackingReport(
        max_error=float(np.max(np.abs(error))),
        rms_error=float(np.sqrt(np.mean(error**2))),
        max_corridor_distance=float(np.max(np.abs(horizontal))),
        corridor_halfwidth=corridor_halfwidth(model, cap),
    )
    logger.info(
        f"Closed-loop check: max error {report.max_error:.3g} V, "
        f"rms {report.rms_error:.3g} V, corridor {report.max_corridor_distance:.3g} / "
        f"{report.corridor_halfwidth:.3g} V"
    )
    return traj, report


# ============================================================================
# Pinning and corridor escape
# ============================================================================


def _pinned_output(model: StModel, v_in: float, precision: Precision):
    """Rest output on γ2 evaluated in the run precision."""
    dtype = np.longdouble if precision == "extended" else np.float64
    k = dtype(model.feedback_k)
    kappa = k - dtype(1) / dtype(model.gain_a)
    return (dtype(v_in) - (dtype(1) - k) * dtype(model.ref_v)) / kappa


def pin_and_release(
    model: StModel,
    level: float,
    hold: float,
    release_delta: float = DEFAULT_RELEASE_DELTA,
    vin_rate_cap: Optional[float] = None,
    settle: Optional[float] = None,
    precision: Precision = "extended",
    tol: Optional[float] = None,
    output_points: Optional[int] = None,
) -> Trajectory:
    """
    Hold the output at a metastable `level`, then nudge the input.

    Without a rate cap the run starts on the preset pair
    (gamma2_inverse(level), level). With a cap the output first slides down
    γ2 from the (V_H, γ1) corner at an input slope of 0.1·cap. After `hold`
    the input is offset by `release_delta`; a positive offset resolves to
    γ3, a negative one to γ1, zero keeps the output pinned.

    Raises:
        OutOfRegionError: Level outside (γ3, γ1)
        InfeasibleError: The approach would saturate the amplifier
    """
    geometry = derive_geometry(model)
    if not geometry.gamma3 < level < geometry.gamma1:
        raise OutOfRegionError(
            f"Pin level {level:g} V outside ({geometry.gamma3:g}, {geometry.gamma1:g})",
            details={"level": level},
        )
    if hold < 0:
        raise ConfigError(f"Hold time must be non-negative, got {hold:g}")

    v_pin = gamma2_inverse(model, level)
    segments: List[Segment] = []
    if vin_rate_cap is not None:
        if vin_rate_cap <= 0:
            raise ConfigError(f"Input rate cap must be positive, got {vin_rate_cap:g}")
        out_slope = -APPROACH_FRACTION * vin_rate_cap / effective_gain(model)
        t_pin = (level - geometry.gamma1) / out_slope
        approach = RampSegment(t_start=0.0, v0=geometry.gamma1, slope=out_slope)
        if not abs(geometry.gamma1 + model.tau0 * out_slope) < model.saturation_m:
            raise InfeasibleError(
                "Pinning approach saturates the amplifier",
                details={"output_slope": out_slope},
            )
        segments.append(_inverse_segment(model, approach))
        v_out0 = geometry.gamma1
        if t_pin > 25.0 * geometry.tau2:
            logger.warning(
                f"Approach lasts {t_pin / geometry.tau2:.1f} tau2; rounding errors grow "
                f"as exp(t/tau2) and may resolve the output before the hold ends"
            )
    else:
        t_pin = 0.0
        v_out0 = _pinned_output(model, v_pin, precision)
    segments.append(ConstantSegment(t_start=t_pin, level=v_pin))

    t_release = t_pin + hold
    if settle is None:
        offset = abs(release_delta) or model.saturation_m
        settle = geometry.tau2 * (math.log(2.0 * model.saturation_m / offset) + 5.0)
        settle += 5.0 * geometry.tau3
    if release_delta != 0.0:
        if t_release > t_pin:
            segments.append(ConstantSegment(t_start=t_release, level=v_pin + release_delta))
        else:
            segments[-1] = ConstantSegment(t_start=t_pin, level=v_pin + release_delta)

    logger.info(
        f"Pinning at {level:g} V (v_in={v_pin:.12g} V) for {hold:g} s, "
        f"release delta {release_delta:g} V"
    )
    return integrate(
        model,
        Waveform(segments=segments),
        v_out0,
        (0.0, t_release + settle),
        tol=tol,
        precision=precision,
        output_points=output_points,
    )


def corridor_escape(
    model: StModel,
    x_offset: float,
    v_out0: float,
    vin_rate_cap: float,
    span: float,
    tol: Optional[float] = None,
    output_points: Optional[int] = None,
) -> Trajectory:
    """
    Worst-case chase of γ2 by a rate-capped input from outside the corridor.

    The input starts `x_offset` to the right (positive) or left (negative) of
    the γ2 point at `v_out0` and moves towards γ2 at the full rate until the
    output saturates, then holds.

    Raises:
        ConfigError: Zero offset or non-positive cap
    """
    if x_offset == 0 or vin_rate_cap <= 0:
        raise ConfigError("corridor_escape needs a non-zero offset and a positive rate cap")
    direction = -1.0 if x_offset > 0 else 1.0
    target = Region.SATURATION_NEG if x_offset > 0 else Region.SATURATION_POS
    v_in0 = gamma2_inverse(model, v_out0) + x_offset
    chase = Waveform(segments=[RampSegment(t_start=0.0, v0=v_in0, slope=direction * vin_rate_cap)])

    first = integrate(model, chase, v_out0, (0.0, span), tol=tol, output_points=output_points)
    entry = next((e for e in first.region_crossings() if e.to_region is target), None)
    if entry is None:
        raise NoCrossingError(
            f"Output did not saturate within {span:g} s",
            details={"x_offset": x_offset, "v_out0": v_out0},
        )
    if not 0.0 < entry.t < span:
        return first

    held = waveforms.then(chase, waveforms.constant(float(waveforms.evaluate(chase, entry.t))), entry.t)
    logger.debug(f"Chase saturated at t={entry.t:.6g} s; holding input")
    return integrate(model, held, v_out0, (0.0, span), tol=tol, output_points=output_points)


def sine_scenario(
    model: StModel,
    swing: float,
    frequency_hz: float,
    periods: float = 1.0,
    offset: float = 0.0,
) -> Tuple[Waveform, Tuple[float, float]]:
    """Desired sine output of peak-to-peak `swing` and the matching span."""
    t_end = periods / frequency_hz
    desired = waveforms.sine(offset, swing / 2.0, frequency_hz, t_end=t_end)
    return desired, (0.0, t_end)


def feasible_frequency_limit(model: StModel, amplitude: float, offset: float = 0.0) -> float:
    """Highest sine frequency whose amplifier demand stays inside (−M, M)."""
    headroom = model.saturation_m - abs(offset)
    if amplitude <= 0:
        return math.inf
    if headroom <= amplitude:
        return 0.0
    return math.sqrt((headroom / amplitude) ** 2 - 1.0) / (2.0 * math.pi * model.tau0)
