"""
Unit tests for trajectory integration.

Closed-form expectations use the high-gain model (τ2 ≈ 2 ps) and the
low-gain model (τ2 = 2 ns) from conftest.
"""

import math

import numpy as np
import pytest

from stmeta.core.config import Settings
from stmeta.core.errors import ConfigError, ToleranceError, WaveformError
from stmeta.models.st_model import Region, StModel
from stmeta.models.trajectory import Trajectory, TrajectoryEvent
from stmeta.models.waveform import ExpSegment, Waveform
from stmeta.services import waveforms
from stmeta.services.integrator import (
    ExpLinear,
    Integrator,
    compensated_sum,
    integrate,
    region_exit_time,
)
from stmeta.services.st_model import (
    classify_region,
    derive_geometry,
    effective_gain,
    region_boundaries,
)


def _switch_time(model, epsilon):
    """Time from γ1 to the negative-saturation boundary after a step to V_H + ε."""
    kappa = effective_gain(model)
    a, k = model.gain_a, model.feedback_k
    ratio = (2.0 * kappa + epsilon) / (a * k * epsilon)
    return derive_geometry(model).tau2 * math.log(ratio)


@pytest.mark.unit
class TestIntegrateClosedForm:
    """Test closed-form stepping against analytic solutions."""

    def test_sub_threshold_input_keeps_rest(self, fast_model):
        """Test that the output stays exactly on γ1 below V_H."""
        traj = integrate(fast_model, waveforms.constant(0.2), 1.0, (0.0, 5e-9), output_points=101)

        assert np.all(traj.v_out == 1.0)
        assert traj.events == []
        assert set(traj.regions) == {Region.SATURATION_POS}

    def test_saturated_decay(self, fast_model):
        """Test v(t) = −M + (v0 + M)·e^{−t/τ0} in negative saturation."""
        traj = integrate(fast_model, waveforms.constant(0.6), 1.0, (0.0, 5e-9), output_points=51)

        expected = -1.0 + 2.0 * np.exp(-traj.t / 1e-9)
        assert traj.v_out == pytest.approx(expected, abs=1e-12)
        assert traj.region_crossings() == []

    def test_step_crossing_time(self, fast_model):
        """Test the linear-region exit after a small overdrive."""
        epsilon = 1e-6
        g = derive_geometry(fast_model)

        traj = integrate(
            fast_model, waveforms.constant(g.v_h + epsilon), g.gamma1, (0.0, 3e-9), output_points=101
        )

        crossings = traj.region_crossings()
        assert len(crossings) == 1
        assert crossings[0].from_region is Region.LINEAR
        assert crossings[0].to_region is Region.SATURATION_NEG
        t_switch = _switch_time(fast_model, epsilon)
        v_exit = (g.v_h + epsilon - 1.0 / fast_model.gain_a) / fast_model.feedback_k
        assert crossings[0].t == pytest.approx(t_switch, rel=1e-6)
        expected_final = -1.0 + (v_exit + 1.0) * math.exp(-(3e-9 - t_switch) / 1e-9)
        assert traj.v_out[-1] == pytest.approx(expected_final, rel=1e-6)

    def test_threshold_event(self, fast_model):
        """Test downward threshold crossing at d2 + τ0·ln((v_exit + M)/M)."""
        epsilon = 1e-6
        g = derive_geometry(fast_model)
        v_in = g.v_h + epsilon
        v_exit = (v_in - 1.0 / fast_model.gain_a) / fast_model.feedback_k

        traj = integrate(
            fast_model, waveforms.constant(v_in), g.gamma1, (0.0, 3e-9), thresholds=[0.0]
        )

        events = traj.threshold_crossings(0.0)
        assert len(events) == 1
        assert events[0].direction == -1
        expected = _switch_time(fast_model, epsilon) + 1e-9 * math.log(v_exit + 1.0)
        assert events[0].t == pytest.approx(expected, rel=1e-6)

    def test_extended_precision_agrees(self, fast_model):
        """Test that long-double stepping reproduces the double result."""
        g = derive_geometry(fast_model)
        wave = waveforms.constant(g.v_h + 1e-5)

        double = integrate(fast_model, wave, g.gamma1, (0.0, 2e-9), output_points=51)
        extended = integrate(
            fast_model, wave, g.gamma1, (0.0, 2e-9), precision="extended", output_points=51
        )

        assert extended.region_crossings()[0].t == pytest.approx(
            double.region_crossings()[0].t, rel=1e-9
        )
        assert extended.v_out.dtype == np.float64

    def test_ramp_leaves_gamma1_at_v_h(self, fast_model):
        """Test that a ramp frees the output exactly when it passes V_H."""
        g = derive_geometry(fast_model)

        traj = integrate(
            fast_model, waveforms.ramp_and_hold(0.0, 1e9, 1.0), g.gamma1, (0.0, 8e-9)
        )

        first = traj.region_crossings()[0]
        assert first.from_region is Region.SATURATION_POS
        assert first.to_region is Region.LINEAR
        assert first.t == pytest.approx(g.v_h / 1e9, rel=1e-6)
        assert traj.regions[-1] is Region.SATURATION_NEG

    def test_samples_include_span_ends(self, fast_model):
        """Test the uniform grid plus event points."""
        g = derive_geometry(fast_model)
        traj = integrate(
            fast_model, waveforms.constant(g.v_h + 1e-4), g.gamma1, (1e-9, 3e-9), output_points=11
        )

        assert traj.t[0] == 1e-9
        assert traj.t[-1] == 3e-9
        assert len(traj) >= 11
        assert traj.region_crossings()[0].t in traj.t


@pytest.mark.unit
class TestIntegrateAdaptive:
    """Test the RK45 path for sine and exponential inputs."""

    def test_sine_below_threshold(self, slow_model):
        """Test that a small sine never frees the output from γ1."""
        wave = waveforms.sine(0.0, 0.1, 1e8)

        traj = integrate(slow_model, wave, 1.0, (0.0, 20e-9), tol=1e-8, output_points=201)

        assert traj.v_out == pytest.approx(np.ones(len(traj)))
        assert traj.region_crossings() == []

    def test_sine_switches(self, slow_model):
        """Test region events under a full-swing sine."""
        wave = waveforms.sine(0.0, 0.8, 1e8)

        traj = integrate(slow_model, wave, 1.0, (0.0, 20e-9), tol=1e-8, thresholds=[0.0])

        kinds = [(e.from_region, e.to_region) for e in traj.region_crossings()]
        assert (Region.SATURATION_POS, Region.LINEAR) in kinds
        assert (Region.LINEAR, Region.SATURATION_NEG) in kinds
        times = [e.t for e in traj.events]
        assert times == sorted(times)
        assert np.all(np.abs(traj.v_out) <= 1.0 + 1e-6)
        assert traj.threshold_crossings(0.0)

    def test_latch_input(self, fast_model):
        """Test an exponential input segment followed by a hold."""
        wave = waveforms.latch_resolution_input(0.0, 0.9, tau_c=0.2e-9, t_onset=0.5e-9)

        traj = integrate(fast_model, wave, 1.0, (0.0, 5e-9), tol=1e-8)

        assert traj.regions[0] is Region.SATURATION_POS
        assert traj.regions[-1] is Region.SATURATION_NEG

    @pytest.mark.parametrize("tol", [1e-6, 1e-8])
    def test_adaptive_agrees_with_closed_form(self, slow_model, tol):
        """Test RK45 against exact stepping through a linear-to-saturation exit."""
        closed_wave = waveforms.constant(0.4)
        rk_wave = Waveform(segments=[ExpSegment(t_start=0.0, v_inf=0.4, v0=0.4, tau=1e-9)])
        grid = np.linspace(0.0, 10e-9, 201)

        exact = integrate(slow_model, closed_wave, 1.0, (0.0, 10e-9), tol=tol, output_points=201)
        adaptive = integrate(slow_model, rk_wave, 1.0, (0.0, 10e-9), tol=tol, output_points=201)

        on_grid_exact = exact.v_out[np.isin(exact.t, grid)]
        on_grid_adaptive = adaptive.v_out[np.isin(adaptive.t, grid)]
        assert len(on_grid_exact) == len(on_grid_adaptive) == 201
        error = np.max(np.abs(on_grid_exact - on_grid_adaptive))
        assert error <= 10 * tol * slow_model.saturation_m
        t_exact = exact.region_crossings()[0].t
        t_adaptive = adaptive.region_crossings()[0].t
        assert t_adaptive == pytest.approx(t_exact, rel=100 * tol)

    def test_adaptive_region_event_sequence(self, slow_model):
        """Test that each exit restarts the run in the region entered."""
        wave = Waveform(segments=[ExpSegment(t_start=0.0, v_inf=0.4, v0=0.4, tau=1e-9)])

        traj = integrate(slow_model, wave, 1.0, (0.0, 10e-9), tol=1e-8)

        crossings = traj.region_crossings()
        assert [(e.from_region, e.to_region) for e in crossings] == [
            (Region.LINEAR, Region.SATURATION_NEG)
        ]
        assert traj.regions[-1] is Region.SATURATION_NEG


@pytest.mark.unit
class TestCompensatedSum:
    """Test the compensated sums used in extended precision."""

    def test_recovers_cancelled_term(self):
        """Test that a small term survives cancellation of two large ones."""
        assert compensated_sum((1.0, 1e-16, -1.0)) == 1e-16
        assert (1.0 + 1e-16) - 1.0 == 0.0

    def test_keeps_long_double(self):
        """Test that long-double terms are summed in long double."""
        total = compensated_sum((np.longdouble(1), np.longdouble(2)))

        assert np.asarray(total).dtype == np.longdouble
        assert total == 3

    def test_elementwise_arrays(self):
        """Test array terms."""
        total = compensated_sum((np.array([1.0, 2.0]), np.array([1e-16, 0.5]), -1.0))

        assert total == pytest.approx([1e-16, 1.5], abs=0.0)

    def test_extended_pieces_use_compensation(self):
        """Test that extended runs build compensated closed-form pieces."""
        assert ExpLinear(1.0, 1e-16, -1.0, 0.0, compensated=True)(1.0) == 1e-16
        assert ExpLinear(1.0, 1e-16, -1.0, 0.0)(1.0) == 0.0


@pytest.mark.unit
class TestIntegrateValidation:
    """Test argument validation."""

    def test_malformed_span(self, fast_model):
        """Test that t1 ≤ t0 is a configuration error."""
        with pytest.raises(ConfigError):
            integrate(fast_model, waveforms.constant(0.0), 1.0, (1e-9, 1e-9))

    @pytest.mark.parametrize("tol", [0.0, 2e-3])
    def test_tolerance_range(self, fast_model, tol):
        """Test that tolerances outside (0, 1e-3] are refused."""
        with pytest.raises(ConfigError):
            integrate(fast_model, waveforms.constant(0.0), 1.0, (0.0, 1e-9), tol=tol)

    def test_initial_output_range(self, fast_model):
        """Test that |v_out0| > 2M is refused."""
        with pytest.raises(ConfigError):
            integrate(fast_model, waveforms.constant(0.0), 2.5, (0.0, 1e-9))

    def test_waveform_must_cover_span(self, fast_model):
        """Test a span running past the waveform end."""
        wave = waveforms.staircase([0.0, 0.1], dwell=1e-9)

        with pytest.raises(WaveformError):
            integrate(fast_model, wave, 1.0, (0.0, 5e-9))

    def test_event_budget(self, fast_model):
        """Test that exceeding max_events raises ToleranceError."""
        integrator = Integrator(Settings(max_events=2))
        wave = waveforms.square_wave(-0.6, 0.6, period=10e-9, n_periods=3)

        with pytest.raises(ToleranceError):
            integrator.integrate(fast_model, wave, 1.0, (0.0, 30e-9))


@pytest.mark.unit
class TestRegionExitTime:
    """Test the exact exit time for constant inputs."""

    def test_linear_exit_matches_integration(self, slow_model):
        """Test τ2·ln((boundary − γ2)/(v0 − γ2)) against a simulated run."""
        expected = 2e-9 * math.log((2.0 / 3.0) / 0.1)

        exit_time = region_exit_time(slow_model, 0.0, 0.1)
        traj = integrate(slow_model, waveforms.constant(0.0), 0.1, (0.0, 10e-9))

        assert exit_time == pytest.approx(expected, rel=1e-12)
        assert traj.region_crossings()[0].t == pytest.approx(expected, rel=1e-6)

    def test_rest_point_never_leaves(self, slow_model):
        """Test that a state exactly on γ2 has no exit."""
        assert region_exit_time(slow_model, 0.0, 0.0) is None

    def test_saturated_rest_never_leaves(self, fast_model):
        """Test that γ1 below V_H has no exit."""
        assert region_exit_time(fast_model, 0.0, 1.0) is None

    def test_boundary_point_is_saturated(self):
        """Test that a point on the negative-saturation boundary never leaves it."""
        model = StModel(gain_a=4.0, feedback_k=0.5, saturation_m=1.0, ref_v=0.0, tau0=1e-9)
        v_lo, _ = region_boundaries(model, 0.5)

        assert v_lo == 0.5
        assert classify_region(model, 0.5, v_lo) is Region.SATURATION_NEG
        assert region_exit_time(model, 0.5, v_lo) is None

    def test_boundary_point_moving_inwards_leaves_at_zero(self):
        """Test a positive-saturation boundary point above +M that falls into the linear region."""
        model = StModel(gain_a=4.0, feedback_k=0.5, saturation_m=1.0, ref_v=0.0, tau0=1e-9)
        _, v_up = region_boundaries(model, 0.5)

        assert v_up == 1.5
        assert classify_region(model, 0.5, v_up) is Region.SATURATION_POS
        assert region_exit_time(model, 0.5, v_up) == 0.0

    def test_saturated_exit_above_rail(self, slow_model):
        """Test leaving positive saturation when the boundary lies above +M."""
        v_up = (0.4 + 1.0 / 3.0) / 0.5
        expected = 1e-9 * math.log((1.8 - 1.0) / (v_up - 1.0))

        exit_time = region_exit_time(slow_model, 0.4, 1.8)
        traj = integrate(slow_model, waveforms.constant(0.4), 1.8, (0.0, 5e-9))

        assert exit_time == pytest.approx(expected, rel=1e-12)
        assert traj.region_crossings()[0].t == pytest.approx(expected, rel=1e-6)


@pytest.mark.unit
class TestTrajectory:
    """Test Trajectory helpers."""

    @pytest.fixture
    def traj(self) -> Trajectory:
        t = np.array([0.0, 1.0, 2.0, 3.0])
        return Trajectory(
            t=t,
            v_in=np.zeros(4),
            v_out=np.array([1.0, 0.5, -0.5, -1.0]),
            regions=(
                Region.SATURATION_POS,
                Region.LINEAR,
                Region.LINEAR,
                Region.SATURATION_NEG,
            ),
            events=[
                TrajectoryEvent(
                    t=0.5,
                    kind="region_cross",
                    from_region=Region.SATURATION_POS,
                    to_region=Region.LINEAR,
                ),
                TrajectoryEvent(t=1.5, kind="threshold_cross", v_th=0.0, direction=-1),
            ],
        )

    def test_unequal_arrays_rejected(self):
        """Test sample alignment validation."""
        with pytest.raises(ValueError):
            Trajectory(t=np.array([0.0, 1.0]), v_in=np.zeros(2), v_out=np.zeros(3), regions=())

    def test_non_increasing_time_rejected(self):
        """Test strictly increasing sample times."""
        with pytest.raises(ValueError):
            Trajectory(
                t=np.array([0.0, 0.0]),
                v_in=np.zeros(2),
                v_out=np.zeros(2),
                regions=(Region.LINEAR, Region.LINEAR),
            )

    def test_crossing_time_interpolates(self, traj):
        """Test linear interpolation between samples."""
        assert traj.crossing_time(0.0) == pytest.approx(1.5)
        assert traj.crossing_time(2.0) is None

    def test_event_filters(self, traj):
        """Test event accessors."""
        assert len(traj.region_crossings()) == 1
        assert traj.threshold_crossings(0.0)[0].t == 1.5
        assert traj.threshold_crossings(0.3) == []
        assert traj.first_event("region_cross", after=1.0) is None

    def test_window(self, traj):
        """Test sub-trajectory extraction."""
        sub = traj.window(1.0, 2.0)

        assert list(sub.t) == [1.0, 2.0]
        assert sub.events[0].kind == "threshold_cross"

    def test_export_rows(self, traj):
        """Test CSV rows and the events sidecar."""
        rows = traj.to_csv_rows()

        assert rows[0] == (0.0, 0.0, 1.0, 1)
        assert rows[-1][3] == 3
        assert traj.events_json()[0] == {
            "t": 0.5,
            "kind": "region_cross",
            "from_region": "saturation_pos",
            "to_region": "linear",
        }
