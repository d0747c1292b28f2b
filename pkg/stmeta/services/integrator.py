"""Trajectory integration for the clipped-linear Schmitt-Trigger.

Constant and Ramp input segments are stepped in closed form: inside one
region and one segment the output follows v(τ) = p0 + p1·τ + r·e^{μτ}, and so
do the region guards and threshold distances. Each such expression has at
most one extremum, so boundary and threshold crossings are bracketed on
monotone pieces and refined by bisection to tol·τ2. In extended precision
the pieces are evaluated in long double with compensated sums. Sine and Exp
segments are integrated with scipy's RK45 pair with dense output, one
region at a time: a terminal exit event stops the run and it restarts in
the region entered.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect

from stmeta.core.config import Settings, get_settings
from stmeta.core.errors import ConfigError, ToleranceError, WaveformError
from stmeta.models.st_model import Region, StModel
from stmeta.models.trajectory import Trajectory, TrajectoryEvent
from stmeta.models.waveform import ConstantSegment, RampSegment, Waveform
from stmeta.services import waveforms
from stmeta.services.st_model import (
    classify_region,
    derive_geometry,
    effective_gain,
    region_boundaries,
)

logger = logging.getLogger(__name__)

Precision = Literal["double", "extended"]

_EPS = float(np.finfo(float).eps)


def compensated_sum(terms: Sequence):
    """
    Neumaier summation that keeps the terms' dtype (long double stays long double).

    Works elementwise on numpy arrays.
    """
    total = terms[0]
    carry = 0 * total
    for term in terms[1:]:
        s = total + term
        big = np.abs(total) >= np.abs(term)
        carry = carry + np.where(big, (total - s) + term, (term - s) + total)
        total = s
    return total + carry


@dataclass(frozen=True)
class ExpLinear:
    """f(τ) = p + q·τ + r·e^{μτ}; `compensated` sums the terms with `compensated_sum`."""

    p: float
    q: float
    r: float
    mu: float
    compensated: bool = False

    def _sum(self, *terms):
        if self.compensated:
            return compensated_sum(terms)
        total = terms[0]
        for term in terms[1:]:
            total = total + term
        return total

    def __call__(self, tau):
        if self.r == 0:
            return self._sum(self.p, self.q * tau)
        with np.errstate(over="ignore"):
            return self._sum(self.p, self.q * tau, self.r * np.exp(self.mu * tau))

    def derivative(self, tau):
        if self.r == 0:
            return self.q + 0 * tau
        with np.errstate(over="ignore"):
            return self.q + self.r * self.mu * np.exp(self.mu * tau)

    def affine(self, offset: float, scale: float, extra_q: float = 0.0) -> "ExpLinear":
        """offset + scale·f(τ) + extra_q·τ."""
        return ExpLinear(
            self._sum(offset, scale * self.p),
            self._sum(scale * self.q, extra_q),
            scale * self.r,
            self.mu,
            self.compensated,
        )

    def extremum(self) -> Optional[float]:
        """Location of the single stationary point, if any."""
        if self.r == 0 or self.q == 0:
            return None
        ratio = -self.q / (self.r * self.mu)
        if ratio <= 0:
            return None
        return float(np.log(ratio) / self.mu)

    def monotone_pieces(self, length: float) -> List[Tuple[float, float]]:
        """Split [0, length] at the extremum."""
        t_star = self.extremum()
        if t_star is not None and 0.0 < t_star < length:
            return [(0.0, t_star), (t_star, length)]
        return [(0.0, length)]


@dataclass(frozen=True)
class _Piece:
    """Output solution valid on [t0, t1] (local time τ = t − t0)."""

    t0: float
    t1: float
    value: Callable


class Integrator:
    """
    Simulates V_out(t) for a model driven by an input waveform.

    Attributes:
        settings: Process settings providing default tolerance, output
            cadence and the event/step budgets
    """

    def __init__(self, settings: Optional[Settings] = None) -> None:
        self.settings = settings or get_settings()

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------

    def integrate(
        self,
        model: StModel,
        input_wave: Waveform,
        v_out0: float,
        t_span: Tuple[float, float],
        tol: Optional[float] = None,
        thresholds: Sequence[float] = (),
        precision: Precision = "double",
        output_points: Optional[int] = None,
    ) -> Trajectory:
        """
        Integrate the model over `t_span`.

        Args:
            model: Model parameters
            input_wave: Input waveform covering `t_span`
            v_out0: Initial output voltage
            t_span: (t0, t1) with t0 < t1
            tol: Relative tolerance in (0, 1e-3]; defaults to settings
            thresholds: Output levels whose crossings are recorded as events
            precision: "extended" evaluates closed-form pieces in long double
            output_points: Uniform sample count; event points are added

        Returns:
            Trajectory: Samples plus region/threshold events

        Raises:
            ConfigError: Malformed span, tolerance or initial state
            WaveformError: Waveform does not cover the span
            ToleranceError: Event or step budget exhausted
        """
        tol = self.settings.default_tol if tol is None else tol
        n_points = output_points or self.settings.output_points
        t0, t1 = (float(t_span[0]), float(t_span[1]))
        self._validate(model, input_wave, v_out0, t0, t1, tol)

        dtype = np.longdouble if precision == "extended" else np.float64
        geometry = derive_geometry(model)
        xtol = tol * geometry.tau2
        logger.info(
            f"Integrating span [{t0:g}, {t1:g}] s, tol={tol:g}, precision={precision}, "
            f"{len(input_wave.segments)} input segment(s)"
        )

        run = _Run(
            model=model,
            dtype=dtype,
            xtol=xtol,
            tol=tol,
            thresholds=[float(v) for v in thresholds],
            max_events=self.settings.max_events,
            max_steps=self.settings.max_solver_steps,
        )
        v = dtype(v_out0)
        region = classify_region(model, float(waveforms.evaluate(input_wave, t0)), float(v))

        for i, seg in enumerate(input_wave.segments):
            a = max(t0, seg.t_start)
            b = min(t1, input_wave.segment_end(i))
            if b <= a:
                continue
            if isinstance(seg, (ConstantSegment, RampSegment)):
                v, region = run.closed_form_window(seg, a, b, v, region)
            else:
                v, region = run.adaptive_window(seg, a, b, v, region)

        trajectory = run.sample(input_wave, t0, t1, n_points)
        logger.info(
            f"Integration finished: {len(trajectory)} samples, "
            f"{len(trajectory.region_crossings())} region crossing(s), "
            f"{len(trajectory.threshold_crossings())} threshold crossing(s)"
        )
        return trajectory

    def _validate(
        self, model: StModel, w: Waveform, v_out0: float, t0: float, t1: float, tol: float
    ) -> None:
        if not (math.isfinite(t0) and math.isfinite(t1) and t1 > t0):
            raise ConfigError(f"Malformed span [{t0}, {t1}]", details={"t_span": [t0, t1]})
        if not 0.0 < tol <= 1e-3:
            raise ConfigError(f"Tolerance {tol:g} outside (0, 1e-3]", details={"tol": tol})
        m = model.saturation_m
        if not abs(float(v_out0)) <= 2.0 * m:
            raise ConfigError(
                f"Initial output {float(v_out0):g} V outside [-2M, 2M]",
                details={"v_out0": float(v_out0), "saturation_m": m},
            )
        if t0 < w.t_start or (w.t_end is not None and t1 > w.t_end):
            raise WaveformError(
                f"Waveform span does not cover [{t0:g}, {t1:g}] s",
                details={"t_start": w.t_start, "t_end": w.t_end},
            )


class _Run:
    """Mutable state of one integration run."""

    def __init__(
        self,
        model: StModel,
        dtype,
        xtol: float,
        tol: float,
        thresholds: List[float],
        max_events: int,
        max_steps: int,
    ) -> None:
        self.model = model
        self.dtype = dtype
        self.compensated = dtype is np.longdouble
        self.xtol = xtol
        self.tol = tol
        self.thresholds = thresholds
        self.max_events = max_events
        self.max_steps = max_steps
        self.pieces: List[_Piece] = []
        self.events: List[TrajectoryEvent] = []
        self.n_region_events = 0
        self.n_steps = 0

        d = dtype
        self.m = d(model.saturation_m)
        self.a = d(model.gain_a)
        self.k = d(model.feedback_k)
        self.shift = (d(1) - self.k) * d(model.ref_v)
        self.tau0 = d(model.tau0)
        self.kappa = self.k - d(1) / self.a
        self.tau2 = self.tau0 / (self.k * self.a - d(1))

    # ------------------------------------------------------------------
    # Closed-form stepping
    # ------------------------------------------------------------------

    def _solution(self, region: Region, v0, vin0, slope) -> ExpLinear:
        if region is Region.SATURATION_POS:
            return ExpLinear(self.m, self.dtype(0), v0 - self.m, -1 / self.tau0, self.compensated)
        if region is Region.SATURATION_NEG:
            return ExpLinear(-self.m, self.dtype(0), v0 + self.m, -1 / self.tau0, self.compensated)
        gamma = (vin0 - self.shift) / self.kappa
        p0 = gamma + slope * self.tau2 / self.kappa
        return ExpLinear(p0, slope / self.kappa, v0 - p0, 1 / self.tau2, self.compensated)

    def _unclipped(self, sol: ExpLinear, vin0, slope) -> ExpLinear:
        # u(τ) = A·((1−k)V_R + k·v(τ) − vin0 − slope·τ)
        return sol.affine(self.a * (self.shift - vin0), self.a * self.k, -self.a * slope)

    def _guards(self, region: Region, u: ExpLinear) -> List[Tuple[ExpLinear, Region]]:
        """Guard functions (inside while > 0) with the region entered on exit."""
        if region is Region.SATURATION_POS:
            return [(u.affine(-self.m, 1), Region.LINEAR)]
        if region is Region.SATURATION_NEG:
            return [(u.affine(-self.m, -1), Region.LINEAR)]
        return [
            (u.affine(self.m, -1), Region.SATURATION_POS),
            (u.affine(self.m, 1), Region.SATURATION_NEG),
        ]

    def _first_exit(self, guard: ExpLinear, length) -> Optional[float]:
        """First τ in [0, length] where the guard turns negative."""
        h0 = guard(0)
        slope0 = guard.derivative(0)
        band = 2 * abs(float(slope0)) * self.xtol + 64 * _EPS * (abs(float(guard.p)) + float(self.m))
        if abs(float(h0)) <= band:
            if float(slope0) < 0:
                return 0.0
        elif float(h0) < 0:
            return 0.0

        for lo, hi in guard.monotone_pieces(float(length)):
            h_lo, h_hi = float(guard(lo)), float(guard(hi))
            if h_hi < h_lo and h_hi < 0:
                if h_lo <= 0:
                    return lo
                return self._root(guard, lo, hi)
        return None

    def _root(self, f: ExpLinear, lo: float, hi: float) -> float:
        return bisect(lambda x: float(f(self.dtype(x))), lo, hi, xtol=self.xtol, maxiter=400)

    def _threshold_events(self, sol: ExpLinear, t_origin: float, length: float) -> None:
        for v_th in self.thresholds:
            h = sol.affine(-self.dtype(v_th), 1)
            for lo, hi in h.monotone_pieces(length):
                h_lo, h_hi = float(h(lo)), float(h(hi))
                if (h_lo < 0 <= h_hi) or (h_lo > 0 >= h_hi):
                    tau = hi if h_hi == 0 else self._root(h, lo, hi)
                    self.events.append(
                        TrajectoryEvent(
                            t=t_origin + tau,
                            kind="threshold_cross",
                            v_th=v_th,
                            direction=1 if h_hi > h_lo else -1,
                        )
                    )

    def _region_event(self, t: float, src: Region, dst: Region) -> None:
        self.n_region_events += 1
        if self.n_region_events > self.max_events:
            raise ToleranceError(
                f"Event budget of {self.max_events} region crossings exhausted at t={t:g} s",
                details={"t": t, "max_events": self.max_events},
            )
        logger.debug(f"Region crossing at t={t:.6g} s: {src.value} -> {dst.value}")
        self.events.append(
            TrajectoryEvent(t=t, kind="region_cross", from_region=src, to_region=dst)
        )

    def closed_form_window(self, seg, a: float, b: float, v, region: Region):
        d = self.dtype
        slope = d(seg.slope) if isinstance(seg, RampSegment) else d(0)
        t = a
        while t < b:
            if isinstance(seg, RampSegment):
                vin0 = (
                    compensated_sum((d(seg.v0), slope * (d(t) - d(seg.t_start))))
                    if self.compensated
                    else d(seg.v0) + slope * (d(t) - d(seg.t_start))
                )
            else:
                vin0 = d(seg.level)
            length = b - t
            sol = self._solution(region, v, vin0, slope)
            u = self._unclipped(sol, vin0, slope)

            exit_tau, next_region = None, region
            for guard, target in self._guards(region, u):
                tau = self._first_exit(guard, length)
                if tau is not None and (exit_tau is None or tau < exit_tau):
                    exit_tau, next_region = tau, target

            span = length if exit_tau is None else exit_tau
            if span > 0:
                self.pieces.append(_Piece(t, t + span, sol))
                self._threshold_events(sol, t, span)
                v = sol(d(span))
            t_next = b if exit_tau is None else t + exit_tau
            if exit_tau is not None:
                self._region_event(t_next, region, next_region)
                region = next_region
            t = t_next
        return v, region

    # ------------------------------------------------------------------
    # Adaptive stepping
    # ------------------------------------------------------------------

    def adaptive_window(self, seg, a: float, b: float, v, region: Region):
        """
        Integrate one Sine or Exp segment with RK45, one region at a time.

        Each run uses the region's own smooth field and stops on a terminal
        exit event, then restarts in the region entered.
        """
        model = self.model
        m = model.saturation_m
        k = model.feedback_k
        shift = (1.0 - k) * model.ref_v

        def vin(t):
            return float(waveforms.segment_value(seg, t - seg.t_start))

        def unclipped(t, y):
            return model.gain_a * (shift + k * y[0] - vin(t))

        drive = {
            Region.SATURATION_POS: lambda t, y: m,
            Region.SATURATION_NEG: lambda t, y: -m,
            Region.LINEAR: unclipped,
        }
        # inside while > 0, paired with the region entered on exit
        guards = {
            Region.SATURATION_POS: [(lambda t, y: unclipped(t, y) - m, Region.LINEAR)],
            Region.SATURATION_NEG: [(lambda t, y: -unclipped(t, y) - m, Region.LINEAR)],
            Region.LINEAR: [
                (lambda t, y: m - unclipped(t, y), Region.SATURATION_POS),
                (lambda t, y: m + unclipped(t, y), Region.SATURATION_NEG),
            ],
        }
        threshold_events = []
        for v_th in self.thresholds:
            for direction in (1, -1):
                fn = _event(lambda t, y, c=v_th: y[0] - c, direction)
                threshold_events.append((fn, v_th, direction))

        characteristic = 1.0 / seg.frequency_hz if seg.kind == "sine" else seg.tau
        t, y = a, float(v)
        while t < b:
            inside = min(g(t, [y]) for g, _ in guards[region])
            if inside < -self.tol * m:
                entered = classify_region(model, vin(t), y)
                if entered is not region:
                    self._region_event(t, region, entered)
                    region = entered
                    continue

            rhs = drive[region]
            exits = [_event(g, -1, terminal=True) for g, _ in guards[region]]
            sol = solve_ivp(
                lambda t_, y_, rhs=rhs: [(rhs(t_, y_) - y_[0]) / model.tau0],
                (t, b),
                [y],
                method="RK45",
                rtol=self.tol,
                atol=self.tol * m,
                dense_output=True,
                max_step=min(b - t, characteristic / 20.0),
                events=exits + [e[0] for e in threshold_events],
            )
            if sol.status < 0:
                raise ToleranceError(f"Adaptive integration failed: {sol.message}")
            self.n_steps += len(sol.t)
            if self.n_steps > self.max_steps:
                raise ToleranceError(
                    f"Step budget of {self.max_steps} exhausted on [{a:g}, {b:g}] s",
                    details={"steps": self.n_steps},
                )

            t_stop = float(sol.t[-1])
            if t_stop > t:
                self.pieces.append(
                    _Piece(
                        t,
                        t_stop,
                        lambda tau, t0=t, dense=sol.sol: dense(t0 + np.asarray(tau, dtype=float))[0],
                    )
                )
            for j, (_, v_th, direction) in enumerate(threshold_events):
                for t_ev in sol.t_events[len(exits) + j]:
                    self.events.append(
                        TrajectoryEvent(
                            t=float(t_ev), kind="threshold_cross", v_th=v_th, direction=direction
                        )
                    )
            y = float(sol.y[0, -1])
            if sol.status == 1:
                for j, (_, dst) in enumerate(guards[region]):
                    if len(sol.t_events[j]):
                        self._region_event(t_stop, region, dst)
                        region = dst
                        break
            t = t_stop if t_stop > t or sol.status == 1 else b

        return self.dtype(y), region

    # ------------------------------------------------------------------
    # Sampling
    # ------------------------------------------------------------------

    def sample(self, w: Waveform, t0: float, t1: float, n_points: int) -> Trajectory:
        events = sorted(self.events, key=lambda e: e.t)
        grid = np.linspace(t0, t1, max(n_points, 2))
        extra = [p.t0 for p in self.pieces] + [p.t1 for p in self.pieces] + [e.t for e in events]
        t = np.unique(np.concatenate([grid, np.asarray(extra, dtype=float)]))
        t = t[(t >= t0) & (t <= t1)]

        starts = np.array([p.t0 for p in self.pieces])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.pieces) - 1)
        v_out = np.empty_like(t)
        for i in np.unique(idx):
            piece = self.pieces[int(i)]
            mask = idx == i
            tau = (t[mask] - piece.t0).astype(self.dtype)
            v_out[mask] = np.asarray(piece.value(tau), dtype=float)

        v_in = np.atleast_1d(waveforms.evaluate(w, t))
        regions = tuple(
            classify_region(self.model, float(vi), float(vo)) for vi, vo in zip(v_in, v_out)
        )
        return Trajectory(t=t, v_in=v_in, v_out=v_out, regions=regions, events=events)


def _event(fn, direction: int, terminal: bool = False):
    fn.direction = direction
    fn.terminal = terminal
    return fn


# ============================================================================
# Module-level API
# ============================================================================


def integrate(
    model: StModel,
    input_wave: Waveform,
    v_out0: float,
    t_span: Tuple[float, float],
    tol: Optional[float] = None,
    thresholds: Sequence[float] = (),
    precision: Precision = "double",
    output_points: Optional[int] = None,
) -> Trajectory:
    """Integrate with the process settings (see `Integrator.integrate`)."""
    return Integrator().integrate(
        model,
        input_wave,
        v_out0,
        t_span,
        tol=tol,
        thresholds=thresholds,
        precision=precision,
        output_points=output_points,
    )


def region_exit_time(model: StModel, v_in_const: float, v_out0: float) -> Optional[float]:
    """
    Exact time for a constant input to carry the state out of its region.

    Points on a dashed boundary belong to the adjacent saturation region, as
    in `classify_region`. A boundary state that moves into the linear region
    leaves at 0.

    Returns:
        Exit time in seconds, or None when the trajectory never leaves
    """
    m = model.saturation_m
    v_lo, v_up = region_boundaries(model, v_in_const)

    if v_lo < v_out0 < v_up:
        gamma = (v_in_const - (1.0 - model.feedback_k) * model.ref_v) / effective_gain(model)
        tau2 = derive_geometry(model).tau2
        if v_out0 == gamma:
            return None
        target = v_up if v_out0 > gamma else v_lo
        return tau2 * math.log((target - gamma) / (v_out0 - gamma))

    if v_out0 >= v_up:
        # decays towards +M; leaves only when the boundary lies above the rail
        if v_up <= m:
            return None
        return model.tau0 * math.log((v_out0 - m) / (v_up - m))

    if v_lo >= -m:
        return None
    return model.tau0 * math.log((v_out0 + m) / (v_lo + m))
