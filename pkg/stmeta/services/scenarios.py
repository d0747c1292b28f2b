"""
Scenario runner shared by the command line and the HTTP API.

Each subcommand turns a RunConfig into a ScenarioResult (tables, JSON
documents, plots and a short summary); writing files is left to the caller.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from stmeta.core.config import Settings, get_settings
from stmeta.core.errors import ConfigError, InfeasibleError
from stmeta.core.run_config import (
    ConstantInput,
    CsvInput,
    InputSpec,
    LatchInput,
    RampHoldInput,
    RunConfig,
    SegmentsInput,
    SineInput,
    SquareInput,
    StaircaseInput,
    StepInput,
)
from stmeta.models.analysis import DelaySpec
from stmeta.models.cmos import CmosStModel
from stmeta.models.result import Plot, ScenarioResult, Series, Table
from stmeta.models.st_model import StModel
from stmeta.models.trajectory import Trajectory
from stmeta.models.waveform import Waveform
from stmeta.services import analysis, cmos, controller, st_model, waveforms
from stmeta.services.integrator import integrate

logger = logging.getLogger(__name__)

AnyModel = Union[StModel, CmosStModel]

SUBCOMMANDS = ("simulate", "phase-map", "delay-sweep", "control", "pin", "fit-tau")
TRAJECTORY_HEADER = ["t", "v_in", "v_out", "region"]


def _trajectory_table(traj: Trajectory) -> Table:
    return Table(header=TRAJECTORY_HEADER, rows=traj.to_csv_rows())


def _trajectory_plot(title: str, runs: List[Tuple[str, Trajectory]]) -> Plot:
    series = []
    for label, traj in runs:
        t_ns = (traj.t * 1e9).tolist()
        series.append(Series(label=f"{label} v_out", x=t_ns, y=traj.v_out.tolist()))
        series.append(Series(label=f"{label} v_in", x=t_ns, y=traj.v_in.tolist()))
    return Plot(title=title, x_label="t (ns)", y_label="V", series=series)


class ScenarioService:
    """
    Runs the six subcommands against a validated RunConfig.

    The clipped-linear model supports every subcommand; the CMOS model
    supports `simulate` and `phase-map`.
    """

    def __init__(self, settings: Optional[Settings] = None) -> None:
        self.settings = settings or get_settings()
        self._handlers: Dict[str, Callable[[RunConfig], ScenarioResult]] = {
            "simulate": self.simulate,
            "phase-map": self.phase_map,
            "delay-sweep": self.delay_sweep,
            "control": self.control,
            "pin": self.pin,
            "fit-tau": self.fit_tau,
        }

    def run(self, subcommand: str, config: RunConfig) -> ScenarioResult:
        """
        Dispatch one subcommand.

        Raises:
            ConfigError: Unknown subcommand or unsupported model kind
            InfeasibleError: Scenario cannot be realized
            NumericError: Solver, bracketing or fit failure
        """
        handler = self._handlers.get(subcommand)
        if handler is None:
            raise ConfigError(
                f"Unknown subcommand {subcommand!r}", details={"choices": list(SUBCOMMANDS)}
            )
        logger.info(f"Running {subcommand} on the {config.model.kind} model")
        result = handler(config)
        logger.info(f"{subcommand} finished: {result.summary}")
        return result

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _model(self, config: RunConfig) -> AnyModel:
        model = config.model.build()
        if isinstance(model, CmosStModel) and "gmin" not in config.model.model_fields_set:
            model = model.model_copy(update={"gmin": self.settings.cmos_gmin})
        return model

    def _opamp(self, config: RunConfig, subcommand: str) -> StModel:
        model = self._model(config)
        if not isinstance(model, StModel):
            raise ConfigError(
                f"{subcommand} requires model.kind=opamp",
                details={"kind": config.model.kind},
            )
        return model

    def build_input(self, spec: InputSpec, model: AnyModel) -> Waveform:
        """Waveform described by a scenario input section."""
        if isinstance(spec, ConstantInput):
            return waveforms.constant(spec.level)
        if isinstance(spec, StepInput):
            return waveforms.step_to(*self._step_levels(spec, model), spec.t_step)
        if isinstance(spec, RampHoldInput):
            return waveforms.ramp_and_hold(spec.v0, spec.slope, spec.v_stop)
        if isinstance(spec, SineInput):
            return waveforms.sine(spec.offset, spec.amplitude, spec.frequency_hz, spec.phase)
        if isinstance(spec, SquareInput):
            return waveforms.square_wave(
                spec.low,
                spec.high,
                spec.period,
                spec.n_periods,
                duty=spec.duty,
                start_high=spec.start_high,
            )
        if isinstance(spec, StaircaseInput):
            return waveforms.staircase(spec.levels, spec.dwell)
        if isinstance(spec, LatchInput):
            return waveforms.latch_resolution_input(
                spec.v_meta, spec.v_rail, spec.tau_c, spec.t_onset
            )
        if isinstance(spec, CsvInput):
            return waveforms.from_csv(spec.path)
        if isinstance(spec, SegmentsInput):
            return Waveform(segments=spec.segments, t_end=spec.t_end)
        raise ConfigError(f"Unsupported input kind {spec.kind!r}")

    @staticmethod
    def _step_levels(spec: StepInput, model: AnyModel) -> Tuple[float, float]:
        if isinstance(model, CmosStModel):
            before = 0.0 if spec.before is None else spec.before
            after = model.vdd if spec.after is None else spec.after
            return before, after
        geometry = st_model.derive_geometry(model)
        before = geometry.v_l if spec.before is None else spec.before
        if spec.after is not None:
            return before, spec.after
        if spec.epsilon is None:
            raise ConfigError("step input needs `after` or `epsilon`")
        return before, geometry.v_h + spec.epsilon

    def _initial_output(self, config: RunConfig, model: AnyModel) -> float:
        if config.scenario.v_out0 is not None:
            return config.scenario.v_out0
        if isinstance(model, CmosStModel):
            return model.vdd
        return st_model.derive_geometry(model).gamma1

    def _span(self, config: RunConfig, model: AnyModel, wave: Waveform) -> Tuple[float, float]:
        if config.run.span is not None:
            return config.run.span
        if wave.t_end is not None:
            return wave.t_start, wave.t_end
        if isinstance(model, CmosStModel):
            return wave.t_start, wave.t_start + 20e-9
        geometry = st_model.derive_geometry(model)
        last = wave.segments[-1].t_start
        return wave.t_start, last + 20.0 * geometry.tau2 + 5.0 * geometry.tau3

    def _tol(self, config: RunConfig) -> float:
        return self.settings.default_tol if config.run.tol is None else config.run.tol

    # ------------------------------------------------------------------
    # Subcommands
    # ------------------------------------------------------------------

    def simulate(self, config: RunConfig) -> ScenarioResult:
        """Integrate one stimulus: trajectory.csv + events.json."""
        model = self._model(config)
        if config.scenario.input is None:
            raise ConfigError("simulate needs scenario.input")
        wave = self.build_input(config.scenario.input, model)
        span = self._span(config, model, wave)
        v_out0 = self._initial_output(config, model)
        if isinstance(model, CmosStModel):
            traj = cmos.cmos_integrate(
                model,
                wave,
                v_out0,
                span,
                tol=self._tol(config),
                thresholds=config.scenario.thresholds,
                output_points=config.run.output_points,
            )
            scale = model.vdd
        else:
            traj = integrate(
                model,
                wave,
                v_out0,
                span,
                tol=self._tol(config),
                thresholds=config.scenario.thresholds,
                precision=config.run.precision or "double",
                output_points=config.run.output_points,
            )
            scale = model.saturation_m
        verdict = analysis.monotonicity_verdict(traj, scale=scale)
        return ScenarioResult(
            subcommand="simulate",
            summary={
                "samples": len(traj),
                "events": len(traj.events),
                "v_out_final": float(traj.v_out[-1]),
                "region_final": traj.regions[-1].value,
                "monotonicity": verdict.verdict,
            },
            tables={"trajectory": _trajectory_table(traj)},
            documents={"events": traj.events_json()},
            plots={"trajectory": _trajectory_plot("Transient", [("run", traj)])},
        )

    def phase_map(self, config: RunConfig) -> ScenarioResult:
        """Derivative field and rest curves: phase_map.csv + gamma_curves.csv."""
        model = self._model(config)
        grid = config.scenario.grid
        summary: Dict[str, object] = {}
        if isinstance(model, CmosStModel):
            bounds = (0.0, model.vdd, 0.0, model.vdd)
        else:
            geometry = st_model.derive_geometry(model)
            pad = max(0.5 * geometry.hysteresis, model.saturation_m / model.gain_a)
            m = 1.2 * model.saturation_m
            bounds = (geometry.v_l - pad, geometry.v_h + pad, -m, m)
            summary.update(geometry.model_dump())
        v_in_min = bounds[0] if grid.v_in_min is None else grid.v_in_min
        v_in_max = bounds[1] if grid.v_in_max is None else grid.v_in_max
        v_out_min = bounds[2] if grid.v_out_min is None else grid.v_out_min
        v_out_max = bounds[3] if grid.v_out_max is None else grid.v_out_max
        v_in = np.linspace(v_in_min, v_in_max, grid.n_in)
        v_out = np.linspace(v_out_min, v_out_max, grid.n_out)

        if isinstance(model, CmosStModel):
            pm = cmos.phase_map(model, v_in, v_out, workers=config.run.workers)
            contour = pm.curves["gamma2"]
            if len(contour):
                v_l, v_h = cmos.cmos_thresholds(contour)
                summary.update({"v_l": v_l, "v_h": v_h, "contour_points": len(contour)})
            if len(contour) >= 5:
                summary["curvature_ratio"] = cmos.contour_curvature_ratio(contour)
        else:
            pm = st_model.phase_map(model, v_in, v_out)

        curve_rows = [
            (name, float(x), float(y))
            for name in sorted(pm.curves)
            for x, y in pm.curves[name]
        ]
        plot = Plot(
            title="Rest curves",
            x_label="v_in (V)",
            y_label="v_out (V)",
            series=[
                Series(label=name, x=pm.curves[name][:, 0].tolist(), y=pm.curves[name][:, 1].tolist())
                for name in sorted(pm.curves)
            ],
        )
        summary["grid"] = [grid.n_in, grid.n_out]
        return ScenarioResult(
            subcommand="phase-map",
            summary=summary,
            tables={
                "phase_map": Table(header=["v_in", "v_out", "dvout_dt"], rows=pm.rows()),
                "gamma_curves": Table(header=["curve", "v_in", "v_out"], rows=curve_rows),
            },
            plots={"phase_map": plot},
        )

    def delay_sweep(self, config: RunConfig) -> ScenarioResult:
        """Measured versus predicted delays over overdrives: delay_sweep.csv."""
        model = self._opamp(config, "delay-sweep")
        sweep = config.scenario.sweep
        knee = 2.0 * model.saturation_m / model.gain_a
        if sweep.epsilons is not None:
            epsilons = sorted(sweep.epsilons)
        else:
            lo = sweep.eps_min if sweep.eps_min is not None else 1e-6 * knee
            hi = sweep.eps_max if sweep.eps_max is not None else 1e-1 * knee
            if not hi > lo:
                raise ConfigError("scenario.sweep needs eps_max > eps_min")
            epsilons = np.geomspace(lo, hi, sweep.n_eps).tolist()

        spec = DelaySpec(sigma=sweep.sigma)
        result = analysis.delay_sweep(
            model, spec, epsilons, tol=self._tol(config), workers=config.run.workers
        )
        rows = [(r.epsilon, r.d2_pred, r.d3_pred, r.total_pred, r.measured) for r in result.rows]
        summary: Dict[str, object] = {
            "points": len(rows),
            "tau2": st_model.derive_geometry(model).tau2,
        }
        documents = {}
        below = [r for r in result.rows if r.epsilon < knee]
        if len(below) >= 3:
            fit = analysis.fit_log_law([r.epsilon for r in below], [r.measured for r in below])
            summary.update({"fit_slope": fit.slope, "fit_r_squared": fit.r_squared})
            documents["delay_sweep_fit"] = fit.model_dump()

        plot = Plot(
            title="Delay versus overdrive",
            x_label="log10 epsilon (V)",
            y_label="delay (ns)",
            log_x=True,
            series=[
                Series(label="measured", x=result.epsilons, y=[r.measured * 1e9 for r in result.rows]),
                Series(label="predicted", x=result.epsilons, y=[r.total_pred * 1e9 for r in result.rows]),
            ],
        )
        return ScenarioResult(
            subcommand="delay-sweep",
            summary=summary,
            tables={
                "delay_sweep": Table(
                    header=["epsilon", "d2_pred", "d3_pred", "total_pred", "measured"], rows=rows
                )
            },
            documents=documents,
            plots={"delay_sweep": plot},
        )

    def control(self, config: RunConfig) -> ScenarioResult:
        """
        Feedforward synthesis and closed-loop check: control_plan.json + trajectory.csv.

        Raises:
            InfeasibleError: The plan violates the amplifier or rate limits
        """
        model = self._opamp(config, "control")
        ctrl = config.scenario.control
        if ctrl.desired is not None:
            desired = self.build_input(ctrl.desired, model)
            span = self._span(config, model, desired)
        else:
            swing = ctrl.swing if ctrl.swing is not None else 0.5 * model.saturation_m
            frequency = ctrl.frequency_hz
            if frequency is None:
                limit = controller.feasible_frequency_limit(model, swing / 2.0, ctrl.offset)
                if not math.isfinite(limit) or limit <= 0:
                    raise InfeasibleError(
                        "No feasible frequency for the requested swing",
                        details={"swing": swing, "offset": ctrl.offset},
                    )
                frequency = 0.25 * limit
            desired, span = controller.sine_scenario(
                model, swing, frequency, ctrl.periods, ctrl.offset
            )
            if config.run.span is not None:
                span = config.run.span

        plan = controller.synthesize(model, desired, span, ctrl.vin_rate_cap)
        if not plan.feasible:
            raise InfeasibleError(
                "Desired output is not realizable",
                details={"violations": [v.model_dump() for v in plan.violations]},
            )
        traj, report = controller.closed_loop_check(
            model, plan, tol=self._tol(config), output_points=config.run.output_points
        )
        return ScenarioResult(
            subcommand="control",
            summary=report.model_dump(),
            tables={"trajectory": _trajectory_table(traj)},
            documents={
                "control_plan": {
                    "plan": plan.model_dump(mode="json"),
                    "tracking": report.model_dump(),
                }
            },
            plots={"trajectory": _trajectory_plot("Forced output", [("closed loop", traj)])},
        )

    def pin(self, config: RunConfig) -> ScenarioResult:
        """Pin, then release by ±δ: pin_release_pos.csv + pin_release_neg.csv."""
        model = self._opamp(config, "pin")
        pin = config.scenario.pin
        geometry = st_model.derive_geometry(model)
        hold = pin.hold if pin.hold is not None else 25.0 * geometry.tau2
        precision = config.run.precision or "extended"

        runs = {}
        for name, delta in (("pos", pin.release_delta), ("neg", -pin.release_delta)):
            runs[name] = controller.pin_and_release(
                model,
                pin.level,
                hold,
                release_delta=delta,
                vin_rate_cap=pin.vin_rate_cap,
                precision=precision,
                tol=self._tol(config),
                output_points=config.run.output_points,
            )

        summary: Dict[str, object] = {"level": pin.level, "hold": hold}
        for name, traj in runs.items():
            if pin.vin_rate_cap is None:
                during = traj.window(0.0, hold)
                summary[f"hold_deviation_{name}"] = float(np.max(np.abs(during.v_out - pin.level)))
            summary[f"v_out_final_{name}"] = float(traj.v_out[-1])

        return ScenarioResult(
            subcommand="pin",
            summary=summary,
            tables={f"pin_release_{name}": _trajectory_table(traj) for name, traj in runs.items()},
            documents={f"pin_release_{name}_events": traj.events_json() for name, traj in runs.items()},
            plots={"pin_release": _trajectory_plot("Pin and release", list(runs.items()))},
        )

    def fit_tau(self, config: RunConfig) -> ScenarioResult:
        """Resolution time constant from pinned releases: fit_tau.json."""
        model = self._opamp(config, "fit-tau")
        fit_cfg = config.scenario.fit
        fit = analysis.fit_resolution_constant(
            model,
            fit_cfg.deltas,
            level=fit_cfg.level,
            tol=self._tol(config),
            precision=config.run.precision or "extended",
            workers=config.run.workers,
        )
        tau2 = st_model.derive_geometry(model).tau2
        document = fit.model_dump()
        document.update({"tau2": tau2, "relative_error": abs(fit.tau_fit - tau2) / tau2})
        plot = Plot(
            title="Resolution time",
            x_label="log10 delta (V)",
            y_label="exit time (ns)",
            log_x=True,
            series=[Series(label="exit", x=fit.deltas, y=[t * 1e9 for t in fit.exit_times])],
        )
        return ScenarioResult(
            subcommand="fit-tau",
            summary={k: document[k] for k in ("tau_fit", "tau2", "relative_error", "r_squared")},
            documents={"fit_tau": document},
            plots={"fit_tau": plot},
        )
