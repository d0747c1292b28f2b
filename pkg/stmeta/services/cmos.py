"""Square-law CMOS Schmitt-Trigger: node solving, derivative field, contour tracing.

Circuit (six transistors):

    M4 (P): VDD -> x_p, gate V_in        M1 (N): x_n -> GND, gate V_in
    M5 (P): x_p -> out, gate V_in        M2 (N): out -> x_n, gate V_in
    M6 (P): x_p -> GND, gate V_out       M3 (N): VDD -> x_n, gate V_out

Each internal node depends only on (V_in, V_out) and its own voltage, so the
two Kirchhoff balances are independent scalar root problems. With the gmin
shunt on every device the balances are strictly decreasing in the node
voltage and change sign on [0, VDD].
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect, brentq

from stmeta.core.config import get_settings
from stmeta.core.errors import BracketingError, ConfigError, ToleranceError, WaveformError
from stmeta.models.cmos import CmosStModel, MosfetParams, PhaseMap
from stmeta.models.st_model import Region
from stmeta.models.trajectory import Trajectory, TrajectoryEvent
from stmeta.models.waveform import Waveform
from stmeta.services import waveforms
from stmeta.services.analysis import parallel_map

logger = logging.getLogger(__name__)

NODE_XTOL = 1e-15
CONTOUR_XTOL = 1e-12
_EVENT_EPS = 1e-15


# ============================================================================
# Devices
# ============================================================================


def _nmos_channel(v_th: float, beta: float, lam: float, vgs: float, vds: float) -> float:
    """Square-law channel current for vds ≥ 0."""
    vov = vgs - v_th
    if vov <= 0.0:
        return 0.0
    if vds < vov:
        return beta * (vov - 0.5 * vds) * vds * (1.0 + lam * vds)
    return 0.5 * beta * vov * vov * (1.0 + lam * vds)


def drain_current(
    params: MosfetParams, v_g: float, v_d: float, v_s: float, gmin: float = 0.0
) -> float:
    """
    Current flowing into the drain and out of the source (A).

    Drain and source are swapped when the channel conducts in reverse; PMOS
    devices are evaluated as mirrored NMOS. A conductance `gmin` is placed in
    parallel with the channel.
    """
    sign = 1.0
    if params.polarity == "p":
        v_g, v_d, v_s, sign = -v_g, -v_d, -v_s, -1.0
    if v_d >= v_s:
        channel = _nmos_channel(params.v_th, params.beta, params.lambda_, v_g - v_s, v_d - v_s)
    else:
        channel = -_nmos_channel(params.v_th, params.beta, params.lambda_, v_g - v_d, v_s - v_d)
    return sign * channel + gmin * (sign * (v_d - v_s))


def _balance_n(m: CmosStModel, v_in: float, v_out: float, v_xn: float) -> float:
    i1 = drain_current(m.m1, v_in, v_xn, 0.0, m.gmin)
    i2 = drain_current(m.m2, v_in, v_out, v_xn, m.gmin)
    i3 = drain_current(m.m3, v_out, m.vdd, v_xn, m.gmin)
    return i2 + i3 - i1


def _balance_p(m: CmosStModel, v_in: float, v_out: float, v_xp: float) -> float:
    i4 = -drain_current(m.m4, v_in, v_xp, m.vdd, m.gmin)
    i5 = -drain_current(m.m5, v_in, v_out, v_xp, m.gmin)
    i6 = -drain_current(m.m6, v_out, 0.0, v_xp, m.gmin)
    return i4 - i5 - i6


def _check_rails(m: CmosStModel, v_in: float, v_out: float) -> None:
    if not (0.0 <= v_in <= m.vdd and 0.0 <= v_out <= m.vdd):
        raise ConfigError(
            f"Operating point ({v_in:g}, {v_out:g}) V outside [0, {m.vdd:g}] V",
            details={"v_in": v_in, "v_out": v_out, "vdd": m.vdd},
        )


def _solve_node(balance, vdd: float, label: str) -> float:
    lo, hi = balance(0.0), balance(vdd)
    if lo == 0.0:
        return 0.0
    if hi == 0.0:
        return vdd
    if lo * hi > 0:
        raise BracketingError(
            f"No current balance sign change for node {label} on [0, {vdd:g}] V",
            details={"node": label, "f_low": lo, "f_high": hi},
        )
    return brentq(balance, 0.0, vdd, xtol=NODE_XTOL, maxiter=200)


def solve_internal_nodes(m: CmosStModel, v_in: float, v_out: float) -> Tuple[float, float]:
    """
    DC voltages of the two stack nodes (x_n, x_p).

    Raises:
        ConfigError: Inputs outside the rails
        BracketingError: A balance without sign change (gmin = 0 corner cases)
    """
    _check_rails(m, v_in, v_out)
    v_xn = _solve_node(lambda x: _balance_n(m, v_in, v_out, x), m.vdd, "x_n")
    v_xp = _solve_node(lambda x: _balance_p(m, v_in, v_out, x), m.vdd, "x_p")
    return v_xn, v_xp


def node_residuals(m: CmosStModel, v_in: float, v_out: float) -> Tuple[float, float]:
    """Kirchhoff residual currents (A) at the solved internal nodes."""
    v_xn, v_xp = solve_internal_nodes(m, v_in, v_out)
    return _balance_n(m, v_in, v_out, v_xn), _balance_p(m, v_in, v_out, v_xp)


def output_currents(m: CmosStModel, v_in: float, v_out: float) -> Tuple[float, float]:
    """(pull-up current into out via M5, pull-down current out via M2)."""
    v_xn, v_xp = solve_internal_nodes(m, v_in, v_out)
    i5 = -drain_current(m.m5, v_in, v_out, v_xp, m.gmin)
    i2 = drain_current(m.m2, v_in, v_out, v_xn, m.gmin)
    return i5, i2


def cmos_field(m: CmosStModel, v_in: float, v_out: float) -> float:
    """dV_out/dt = (I_M5 − I_M2)/C_load in V/s."""
    i5, i2 = output_currents(m, v_in, v_out)
    return (i5 - i2) / m.c_load


def cutoff_margins(m: CmosStModel, v_in: float, v_out: float) -> Tuple[float, float]:
    """
    Gate overdrive of the output-side devices: (V_GS(M2) − V_th, V_SG(M5) − V_th).

    A margin ≤ 0 means that device is cut off.
    """
    v_xn, v_xp = solve_internal_nodes(m, v_in, v_out)
    return v_in - min(v_out, v_xn) - m.m2.v_th, max(v_out, v_xp) - v_in - m.m5.v_th


def classify_cmos_region(m: CmosStModel, v_in: float, v_out: float) -> Region:
    """
    Saturation_Pos when the pull-down device M2 is cut off, Saturation_Neg
    when the pull-up device M5 is cut off, Linear otherwise.
    """
    pos, neg = cutoff_margins(m, v_in, v_out)
    if pos <= 0:
        return Region.SATURATION_POS
    if neg <= 0:
        return Region.SATURATION_NEG
    return Region.LINEAR


def local_time_constant(m: CmosStModel, v_in: float, v_out: float) -> float:
    """1/|∂field/∂V_out| by central difference."""
    h = 1e-6 * m.vdd
    lo, hi = max(0.0, v_out - h), min(m.vdd, v_out + h)
    slope = (cmos_field(m, v_in, hi) - cmos_field(m, v_in, lo)) / (hi - lo)
    if slope == 0.0:
        return float("inf")
    return 1.0 / abs(slope)


# ============================================================================
# Equilibrium contour and phase map
# ============================================================================


def _row_root(m: CmosStModel, v_out: float) -> Optional[float]:
    f_lo = cmos_field(m, 0.0, v_out)
    f_hi = cmos_field(m, m.vdd, v_out)
    if f_lo == 0.0:
        return 0.0
    if f_hi == 0.0:
        return m.vdd
    if f_lo * f_hi > 0:
        return None
    return bisect(lambda x: cmos_field(m, x, v_out), 0.0, m.vdd, xtol=CONTOUR_XTOL, maxiter=200)


def trace_gamma2(
    m: CmosStModel,
    v_out_grid: Sequence[float],
    skip_rows: bool = False,
    workers: Optional[int] = None,
) -> np.ndarray:
    """
    Equilibrium contour: for each output row, the input where the field vanishes.

    Args:
        m: Circuit parameters
        v_out_grid: Output rows within the rails
        skip_rows: Drop rows without a sign change instead of failing
        workers: Process count for the per-row solves

    Returns:
        Array of shape (N, 2) with columns (v_in, v_out)

    Raises:
        BracketingError: A row has no sign change and `skip_rows` is False
    """
    rows = [float(v) for v in v_out_grid]
    for v in rows:
        _check_rails(m, 0.0, v)
    roots = parallel_map(_RowSolver(m), rows, workers)

    points = []
    skipped = []
    for v_out, v_in in zip(rows, roots):
        if v_in is None:
            if not skip_rows:
                raise BracketingError(
                    f"No field sign change along row v_out={v_out:g} V",
                    details={"v_out": v_out},
                )
            skipped.append(v_out)
            continue
        points.append((v_in, v_out))
    if skipped:
        logger.warning(f"Skipped {len(skipped)} contour row(s) without sign change")
    logger.info(f"Traced equilibrium contour with {len(points)} point(s)")
    return np.asarray(points, dtype=float).reshape(-1, 2)


class _RowSolver:
    """Picklable per-row solver for process pools."""

    def __init__(self, m: CmosStModel) -> None:
        self.m = m

    def __call__(self, v_out: float) -> Optional[float]:
        return _row_root(self.m, v_out)


def cmos_thresholds(contour: np.ndarray) -> Tuple[float, float]:
    """(V_L, V_H): extreme inputs reached by the equilibrium contour."""
    if len(contour) == 0:
        raise ConfigError("Empty contour")
    return float(np.min(contour[:, 0])), float(np.max(contour[:, 0]))


def contour_curvature_ratio(contour: np.ndarray) -> float:
    """
    Steepness of the contour ends relative to its middle.

    Slopes are |Δv_out/Δv_in| over neighbouring points: the first and last
    segments (averaged) against the secant through the central point.
    """
    pts = contour[np.argsort(contour[:, 1])]
    n = len(pts)
    if n < 5:
        raise ConfigError("Contour needs at least 5 points for a curvature ratio")
    mid_lo, mid_hi = (n - 1) // 2, n // 2
    if mid_lo == mid_hi:
        mid_lo, mid_hi = mid_lo - 1, mid_hi + 1

    def secant(i: int, j: int) -> float:
        dv_in = abs(pts[j, 0] - pts[i, 0])
        dv_out = abs(pts[j, 1] - pts[i, 1])
        return float("inf") if dv_in == 0 else dv_out / dv_in

    ends = 0.5 * (secant(0, 1) + secant(n - 2, n - 1))
    return ends / secant(mid_lo, mid_hi)


def phase_map(
    m: CmosStModel,
    v_in_grid: Sequence[float],
    v_out_grid: Sequence[float],
    workers: Optional[int] = None,
) -> PhaseMap:
    """Field grid plus the traced equilibrium contour (rows at the rails skipped)."""
    v_in_arr = np.asarray(v_in_grid, dtype=float)
    v_out_arr = np.asarray(v_out_grid, dtype=float)
    rows = parallel_map(_FieldRow(m, v_in_arr), list(v_out_arr), workers)
    contour = trace_gamma2(m, v_out_arr, skip_rows=True, workers=workers)
    return PhaseMap(
        v_in=v_in_arr, v_out=v_out_arr, field=np.asarray(rows), curves={"gamma2": contour}
    )


class _FieldRow:
    def __init__(self, m: CmosStModel, v_in: np.ndarray) -> None:
        self.m = m
        self.v_in = v_in

    def __call__(self, v_out: float) -> List[float]:
        return [cmos_field(self.m, float(x), float(v_out)) for x in self.v_in]


# ============================================================================
# Transient simulation
# ============================================================================


def _region_from_margins(pos: float, neg: float) -> Region:
    if pos <= 0:
        return Region.SATURATION_POS
    if neg <= 0:
        return Region.SATURATION_NEG
    return Region.LINEAR


def cmos_integrate(
    m: CmosStModel,
    input_wave: Waveform,
    v_out0: float,
    t_span: Tuple[float, float],
    tol: Optional[float] = None,
    thresholds: Sequence[float] = (),
    output_points: Optional[int] = None,
) -> Trajectory:
    """
    Adaptive RK45 integration of the CMOS output node.

    Each input segment is integrated separately so steps never straddle a
    joint. Region tags come from `classify_cmos_region`. Region crossings are
    located by solver events on the M2 and M5 cutoff margins, with the same
    event budget as the clipped-linear integrator.

    Raises:
        ConfigError: Malformed span or tolerance
        WaveformError: Waveform does not cover the span
        ToleranceError: Solver failure, step or event budget exhausted
    """
    settings = get_settings()
    tol = settings.default_tol if tol is None else tol
    n_points = output_points or settings.output_points
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ConfigError(f"Malformed span [{t0}, {t1}]")
    if not 0.0 < tol <= 1e-3:
        raise ConfigError(f"Tolerance {tol:g} outside (0, 1e-3]")
    if t0 < input_wave.t_start or (input_wave.t_end is not None and t1 > input_wave.t_end):
        raise WaveformError(f"Waveform span does not cover [{t0:g}, {t1:g}] s")

    logger.info(f"CMOS transient over [{t0:g}, {t1:g}] s, tol={tol:g}")

    def clamp(v: float) -> float:
        return min(max(v, 0.0), m.vdd)

    pieces = []
    events: List[TrajectoryEvent] = []
    n_steps = 0
    v = float(v_out0)
    region: Optional[Region] = None

    def cross(t_ev: float, to_region: Region) -> None:
        nonlocal region
        if to_region is region:
            return
        n_crossings = sum(1 for e in events if e.kind == "region_cross")
        if n_crossings >= settings.max_events:
            raise ToleranceError(
                f"Event budget of {settings.max_events} region crossings exhausted at t={t_ev:g} s",
                details={"t": t_ev, "max_events": settings.max_events},
            )
        logger.debug(f"CMOS region crossing at t={t_ev:.6g} s: {region.value} -> {to_region.value}")
        events.append(
            TrajectoryEvent(t=t_ev, kind="region_cross", from_region=region, to_region=to_region)
        )
        region = to_region

    for i, seg in enumerate(input_wave.segments):
        a = max(t0, seg.t_start)
        b = min(t1, input_wave.segment_end(i))
        if b <= a:
            continue

        def vin(t, seg=seg):
            return clamp(float(waveforms.segment_value(seg, t - seg.t_start)))

        def field(t, y):
            return [cmos_field(m, vin(t), clamp(y[0]))]

        cache = {}

        def margins(t, y):
            key = (t, float(y[0]))
            if key not in cache:
                cache.clear()
                cache[key] = cutoff_margins(m, vin(t), clamp(y[0]))
            return cache[key]

        guard_fns = []
        for which in (0, 1):
            for direction in (-1, 1):
                fn = lambda t, y, j=which: margins(t, y)[j]  # noqa: E731
                fn.terminal = False
                fn.direction = direction
                guard_fns.append((fn, which, direction))
        threshold_fns = []
        for v_th in thresholds:
            fn = lambda t, y, c=v_th: y[0] - c  # noqa: E731
            fn.terminal = False
            threshold_fns.append((fn, v_th))

        start = _region_from_margins(*margins(a, [v]))
        if region is None:
            region = start
        else:
            cross(a, start)

        sol = solve_ivp(
            field,
            (a, b),
            [v],
            method="RK45",
            rtol=tol,
            atol=tol * m.vdd,
            dense_output=True,
            events=[fn for fn, _, _ in guard_fns] + [fn for fn, _ in threshold_fns],
        )
        if sol.status < 0:
            raise ToleranceError(f"CMOS integration failed: {sol.message}")
        n_steps += len(sol.t)
        if n_steps > settings.max_solver_steps:
            raise ToleranceError(f"Step budget exhausted on [{a:g}, {b:g}] s")

        found = []
        for j, (_, which, direction) in enumerate(guard_fns):
            found.extend((float(t_ev), which, direction) for t_ev in sol.t_events[j])
        for t_ev, which, direction in sorted(found):
            pos, neg = margins(t_ev, sol.sol(t_ev))
            if which == 0:
                pos = -1.0 if direction < 0 else abs(pos) + _EVENT_EPS
            else:
                neg = -1.0 if direction < 0 else abs(neg) + _EVENT_EPS
            cross(t_ev, _region_from_margins(pos, neg))

        n_guards = len(guard_fns)
        for j, (_, v_th) in enumerate(threshold_fns):
            for t_ev in sol.t_events[n_guards + j]:
                slope = field(t_ev, sol.sol(t_ev))[0]
                events.append(
                    TrajectoryEvent(
                        t=float(t_ev),
                        kind="threshold_cross",
                        v_th=v_th,
                        direction=1 if slope >= 0 else -1,
                    )
                )
        pieces.append((a, b, sol.sol))
        v = float(sol.y[0, -1])

    grid = np.linspace(t0, t1, max(n_points, 2))
    extra = [p[0] for p in pieces] + [e.t for e in events]
    t = np.unique(np.concatenate([grid, np.asarray(extra, dtype=float)]))
    t = t[(t >= t0) & (t <= t1)]
    starts = np.array([p[0] for p in pieces])
    idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(pieces) - 1)
    v_out = np.array([float(pieces[i][2](x)[0]) for i, x in zip(idx, t)])
    v_in = np.atleast_1d(waveforms.evaluate(input_wave, t))

    regions = tuple(
        classify_cmos_region(m, clamp(float(vi)), clamp(float(vo)))
        for vi, vo in zip(v_in, v_out)
    )
    events.sort(key=lambda e: e.t)
    logger.info(f"CMOS transient finished: {len(t)} samples, {len(events)} event(s)")
    return Trajectory(t=t, v_in=v_in, v_out=v_out, regions=regions, events=events)
