"""Delay prediction and measurement, sweeps, monotonicity and log-law fits."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy import stats

from stmeta.core.config import get_settings
from stmeta.core.errors import ConfigError, DegenerateFitError, NoCrossingError
from stmeta.models.analysis import (
    DelayPrediction,
    DelaySpec,
    LogLawFit,
    MonotonicityVerdict,
    ResolutionFit,
    SweepResult,
    SweepRow,
)
from stmeta.models.st_model import StModel
from stmeta.models.trajectory import Trajectory
from stmeta.services import waveforms
from stmeta.services.integrator import Precision, integrate
from stmeta.services.st_model import derive_geometry, gamma2_inverse

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Sample-to-sample differences below this fraction of M count as flat
MONOTONE_TOLERANCE = 1e-12


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """
    Ordered map, in a process pool when `workers` > 1.

    Results are returned in input order regardless of completion order.
    """
    items = list(items)
    workers = get_settings().workers if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.info(f"Dispatching {len(items)} job(s) to {workers} worker process(es)")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# ============================================================================
# Prediction
# ============================================================================


def predict_delay(model: StModel, spec: DelaySpec, epsilon: float) -> DelayPrediction:
    """
    Closed-form delay after a step to V_H + ε.

    d2 = τ2·ln(2M/(Aε)), clamped to 0 once ε ≥ 2M/A; d3 = τ3·ln(1/σ).

    Raises:
        ConfigError: If epsilon ≤ 0
    """
    if not epsilon > 0:
        raise ConfigError(f"Overdrive epsilon must be positive, got {epsilon:g}")
    geometry = derive_geometry(model)
    ratio = 2.0 * model.saturation_m / (model.gain_a * epsilon)
    d2 = geometry.tau2 * math.log(ratio) if ratio > 1.0 else 0.0
    d3 = minimum_switching_time(model, spec)
    return DelayPrediction(d2=d2, d3=d3, total=d2 + d3)


def minimum_switching_time(model: StModel, spec: DelaySpec) -> float:
    """τ3·ln(1/σ): delay of a step that lands directly in negative saturation."""
    return derive_geometry(model).tau3 * math.log(1.0 / spec.sigma)


# ============================================================================
# Measurement
# ============================================================================


def measure_delay(traj: Trajectory, v_th: float, t_stimulus: float) -> float:
    """
    Time from the stimulus until V_out first crosses `v_th`.

    Uses a recorded threshold event when one exists, otherwise linear
    interpolation between samples.

    Raises:
        NoCrossingError: The trajectory never crosses the threshold
    """
    for event in traj.threshold_crossings(v_th):
        if event.t >= t_stimulus:
            return event.t - t_stimulus
    t_cross = traj.crossing_time(v_th, after=t_stimulus)
    if t_cross is None:
        raise NoCrossingError(
            f"No crossing of {v_th:g} V after t={t_stimulus:g} s",
            details={"v_th": v_th, "t_stimulus": t_stimulus, "t_end": float(traj.t[-1])},
        )
    return t_cross - t_stimulus


def step_response(
    model: StModel,
    spec: DelaySpec,
    epsilon: float,
    tol: Optional[float] = None,
    span: Optional[float] = None,
) -> Trajectory:
    """Output starting on γ1 with the input stepped to V_H + ε at t = 0."""
    geometry = derive_geometry(model)
    v_th = spec.v_th(geometry)
    if span is None:
        d2 = predict_delay(model, spec, epsilon).d2 if epsilon > 0 else 0.0
        span = 2.0 * d2 + minimum_switching_time(model, spec) + 5.0 * geometry.tau3
    wave = waveforms.constant(geometry.v_h + epsilon)
    return integrate(model, wave, geometry.gamma1, (0.0, span), tol=tol, thresholds=[v_th])


def _sweep_point(args: Tuple[StModel, DelaySpec, float, Optional[float]]) -> SweepRow:
    model, spec, epsilon, tol = args
    prediction = predict_delay(model, spec, epsilon)
    traj = step_response(model, spec, epsilon, tol=tol)
    measured = measure_delay(traj, spec.v_th(derive_geometry(model)), 0.0)
    return SweepRow(
        epsilon=epsilon,
        d2_pred=prediction.d2,
        d3_pred=prediction.d3,
        total_pred=prediction.total,
        measured=measured,
    )


def delay_sweep(
    model: StModel,
    spec: DelaySpec,
    epsilons: Sequence[float],
    tol: Optional[float] = None,
    workers: Optional[int] = None,
) -> SweepResult:
    """
    Simulated and predicted delays for a list of overdrives.

    Raises:
        ConfigError: Epsilons empty, non-positive or unsorted
    """
    eps = [float(e) for e in epsilons]
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("delay_sweep needs a non-empty list of positive epsilons")
    if any(b < a for a, b in zip(eps, eps[1:])):
        raise ConfigError("delay_sweep epsilons must be sorted ascending")

    logger.info(f"Delay sweep over {len(eps)} overdrive(s), {eps[0]:g} .. {eps[-1]:g} V")
    rows = parallel_map(_sweep_point, [(model, spec, e, tol) for e in eps], workers)
    return SweepResult(rows=rows)


def late_transition_scenario(
    model: StModel,
    epsilon: float,
    slope: float,
    v_start: Optional[float] = None,
    tol: Optional[float] = None,
    span: Optional[float] = None,
) -> Trajectory:
    """
    Ramp from `v_start` (default V_L) that stops at V_H + ε, output on γ1.

    Small ε keeps the output near γ2 long after the ramp has stopped and
    then produces a steep late transition.
    """
    geometry = derive_geometry(model)
    v_start = geometry.v_l if v_start is None else v_start
    v_stop = geometry.v_h + epsilon
    wave = waveforms.ramp_and_hold(v_start, slope, v_stop)
    t_hold = (v_stop - v_start) / slope
    if span is None:
        ratio = 2.0 * model.saturation_m / (model.gain_a * abs(epsilon)) if epsilon else 1e12
        span = t_hold + geometry.tau2 * math.log(max(ratio, 1.0)) * 2.0 + 5.0 * geometry.tau3
    return integrate(model, wave, geometry.gamma1, (0.0, span), tol=tol)


# ============================================================================
# Monotonicity
# ============================================================================


def monotonicity_verdict(traj: Trajectory, scale: Optional[float] = None) -> MonotonicityVerdict:
    """
    Classify V_out(t) from sample-to-sample differences.

    Args:
        traj: Trajectory to inspect
        scale: Voltage scale M for the flatness tolerance; defaults to max|V_out|

    Returns:
        MonotonicityVerdict: strict, with plateaus, or non-monotone with the
        time where the direction first reverses
    """
    scale = float(np.max(np.abs(traj.v_out))) if scale is None else scale
    tol = MONOTONE_TOLERANCE * max(scale, np.finfo(float).tiny)
    diffs = np.diff(traj.v_out)
    signs = np.where(diffs > tol, 1, np.where(diffs < -tol, -1, 0))
    moving = np.nonzero(signs)[0]

    if len(moving) == 0:
        return MonotonicityVerdict(verdict="monotone_with_plateaus")
    direction = int(signs[moving[0]])
    reversed_at = np.nonzero(signs == -direction)[0]
    if len(reversed_at):
        return MonotonicityVerdict(
            verdict="non_monotone",
            direction=direction,
            t_witness=float(traj.t[reversed_at[0]]),
        )
    if len(moving) == len(signs):
        return MonotonicityVerdict(verdict="strictly_monotone", direction=direction)
    return MonotonicityVerdict(verdict="monotone_with_plateaus", direction=direction)


# ============================================================================
# Fits
# ============================================================================


def fit_log_law(x: Sequence[float], delays: Sequence[float]) -> LogLawFit:
    """
    Ordinary least squares of delay against ln(1/x).

    Raises:
        DegenerateFitError: Fewer than 3 points, non-positive x or no spread
    """
    x_arr = np.asarray(x, dtype=float)
    y_arr = np.asarray(delays, dtype=float)
    if len(x_arr) != len(y_arr) or len(x_arr) < 3:
        raise DegenerateFitError(
            "Log-law fit needs at least 3 paired points",
            details={"n_x": len(x_arr), "n_y": len(y_arr)},
        )
    if np.any(x_arr <= 0):
        raise DegenerateFitError("Log-law fit needs positive abscissae")
    log_inv = np.log(1.0 / x_arr)
    if np.ptp(log_inv) == 0:
        raise DegenerateFitError("Log-law fit abscissae have no spread")

    result = stats.linregress(log_inv, y_arr)
    fit = LogLawFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue**2),
        n_points=len(x_arr),
    )
    logger.info(f"Log-law fit: slope={fit.slope:.6g} s, r2={fit.r_squared:.6f}")
    return fit


def _release_exit(
    args: Tuple[StModel, float, float, Optional[float], Precision]
) -> float:
    model, level, delta, tol, precision = args
    geometry = derive_geometry(model)
    v_in = gamma2_inverse(model, level) + delta
    span = geometry.tau2 * (math.log(2.0 * model.saturation_m / delta) + 5.0)
    traj = integrate(
        model,
        waveforms.constant(v_in),
        level,
        (0.0, span),
        tol=tol,
        precision=precision,
        output_points=50,
    )
    event = traj.first_event("region_cross")
    if event is None:
        raise NoCrossingError(
            f"Pinned output did not leave the linear region within {span:g} s (delta={delta:g} V)",
            details={"delta": delta, "span": span},
        )
    return event.t


def fit_resolution_constant(
    model: StModel,
    deltas: Sequence[float],
    level: float = 0.0,
    tol: Optional[float] = None,
    precision: Precision = "extended",
    workers: Optional[int] = None,
) -> ResolutionFit:
    """
    Recover the resolution time constant from pinned-release runs.

    For every δ the output starts on γ2 at `level` while the input sits δ
    above the pinning input; the time to leave the linear region is fitted
    against ln(1/δ).

    Raises:
        DegenerateFitError: Deltas not positive or spanning fewer than 3 decades
    """
    d = [float(x) for x in deltas]
    if len(d) < 3 or any(x <= 0 for x in d):
        raise DegenerateFitError("fit_resolution_constant needs at least 3 positive deltas")
    if math.log10(max(d) / min(d)) < 3.0:
        raise DegenerateFitError(
            "Deltas must span at least 3 decades",
            details={"min": min(d), "max": max(d)},
        )

    logger.info(f"Resolution fit over {len(d)} release offset(s) at level {level:g} V")
    exit_times = parallel_map(
        _release_exit, [(model, level, delta, tol, precision) for delta in d], workers
    )
    fit = fit_log_law(d, exit_times)
    return ResolutionFit(
        tau_fit=fit.slope, r_squared=fit.r_squared, deltas=d, exit_times=exit_times
    )
