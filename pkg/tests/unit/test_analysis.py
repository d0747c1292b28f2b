"""
Unit tests for delay analysis, monotonicity and log-law fits.
"""

import math

import numpy as np
import pytest

from stmeta.core.config import Settings
from stmeta.core.errors import ConfigError, DegenerateFitError, NoCrossingError
from stmeta.models.analysis import DelaySpec
from stmeta.models.st_model import Region
from stmeta.models.trajectory import Trajectory
from stmeta.services import analysis, waveforms
from stmeta.services.integrator import integrate
from stmeta.services.st_model import derive_geometry


def _trajectory(v_out):
    v_out = np.asarray(v_out, dtype=float)
    n = len(v_out)
    return Trajectory(
        t=np.arange(n, dtype=float),
        v_in=np.zeros(n),
        v_out=v_out,
        regions=tuple(Region.LINEAR for _ in range(n)),
    )


def _square(x):
    return x * x


@pytest.mark.unit
class TestPrediction:
    """Test closed-form delay prediction."""

    def test_small_overdrive(self, fast_model, delay_spec):
        """Test d2 = τ2·ln(2M/(Aε)) and d3 = τ0·ln 2."""
        g = derive_geometry(fast_model)

        p = analysis.predict_delay(fast_model, delay_spec, 1e-6)

        assert p.d2 == pytest.approx(g.tau2 * math.log(2000.0))
        assert p.d3 == pytest.approx(1e-9 * math.log(2.0))
        assert p.total == pytest.approx(p.d2 + p.d3)

    def test_large_overdrive_clamps_d2(self, fast_model, delay_spec):
        """Test that ε ≥ 2M/A skips the linear region."""
        p = analysis.predict_delay(fast_model, delay_spec, 0.01)

        assert p.d2 == 0.0
        assert p.total == analysis.minimum_switching_time(fast_model, delay_spec)

    def test_non_positive_epsilon(self, fast_model, delay_spec):
        """Test that ε ≤ 0 is refused."""
        with pytest.raises(ConfigError):
            analysis.predict_delay(fast_model, delay_spec, 0.0)

    def test_delay_spec_threshold(self, fast_model):
        """Test V_th = γ3 + σ·(γ1 − γ3)."""
        g = derive_geometry(fast_model)

        assert DelaySpec(sigma=0.5).v_th(g) == 0.0
        assert DelaySpec(sigma=0.25).v_th(g) == pytest.approx(-0.5)


@pytest.mark.unit
class TestMeasurement:
    """Test delay measurement from trajectories."""

    def test_measured_matches_prediction(self, fast_model, delay_spec):
        """Test measured versus predicted delay for a small overdrive."""
        predicted = analysis.predict_delay(fast_model, delay_spec, 1e-6).total

        traj = analysis.step_response(fast_model, delay_spec, 1e-6)
        measured = analysis.measure_delay(traj, 0.0, 0.0)

        assert measured == pytest.approx(predicted, rel=0.05)

    def test_small_sigma_within_default_span(self, fast_model):
        """Test that a threshold near γ3 is reached inside the default span."""
        spec = DelaySpec(sigma=0.001)
        g = derive_geometry(fast_model)

        traj = analysis.step_response(fast_model, spec, 1e-4)
        measured = analysis.measure_delay(traj, spec.v_th(g), 0.0)

        predicted = analysis.predict_delay(fast_model, spec, 1e-4).total
        assert predicted > 5.0 * g.tau3
        assert measured == pytest.approx(predicted, rel=0.05)

    def test_interpolated_measurement(self):
        """Test the sample-interpolation fallback without threshold events."""
        traj = _trajectory([1.0, 0.5, -0.5, -1.0])

        assert analysis.measure_delay(traj, 0.0, 0.5) == pytest.approx(1.0)

    def test_no_crossing(self, fast_model):
        """Test NoCrossingError when the output never switches."""
        traj = integrate(fast_model, waveforms.constant(0.0), 1.0, (0.0, 1e-9), output_points=11)

        with pytest.raises(NoCrossingError) as exc:
            analysis.measure_delay(traj, 0.0, 0.0)
        assert exc.value.exit_code == 2


@pytest.mark.unit
class TestDelaySweep:
    """Test delay sweeps."""

    def test_rows_ordered(self, fast_model, delay_spec):
        """Test one row per epsilon, in input order."""
        eps = [1e-7, 1e-5, 1e-3]

        sweep = analysis.delay_sweep(fast_model, delay_spec, eps, workers=1)

        assert sweep.epsilons == eps
        assert sweep.measured == sorted(sweep.measured, reverse=True)
        for row in sweep.rows:
            assert row.measured == pytest.approx(row.total_pred, rel=0.05)

    @pytest.mark.parametrize("eps", [[], [1e-6, -1e-6], [1e-4, 1e-6]])
    def test_invalid_epsilons(self, fast_model, delay_spec, eps):
        """Test empty, non-positive and unsorted lists."""
        with pytest.raises(ConfigError):
            analysis.delay_sweep(fast_model, delay_spec, eps)

    def test_parallel_map_preserves_order(self):
        """Test serial fallback and ordering."""
        assert analysis.parallel_map(_square, [3, 1, 2], workers=1) == [9, 1, 4]

    def test_parallel_map_reads_worker_setting(self, mocker):
        """Test that workers default to the process settings."""
        mocker.patch(
            "stmeta.services.analysis.get_settings", return_value=Settings(workers=1)
        )
        pool = mocker.patch("stmeta.services.analysis.ProcessPoolExecutor")

        assert analysis.parallel_map(_square, [2, 3]) == [4, 9]
        pool.assert_not_called()

    def test_parallel_map_uses_pool(self, mocker):
        """Test pool dispatch with an ordered reduction."""
        pool = mocker.patch("stmeta.services.analysis.ProcessPoolExecutor")
        pool.return_value.__enter__.return_value.map.return_value = iter([1, 4, 9])

        assert analysis.parallel_map(_square, [1, 2, 3], workers=3) == [1, 4, 9]
        pool.assert_called_once_with(max_workers=3)

    @pytest.mark.slow
    def test_parallel_map_process_pool(self):
        """Test that a pool returns results in input order."""
        assert analysis.parallel_map(_square, list(range(6)), workers=2) == [0, 1, 4, 9, 16, 25]


@pytest.mark.unit
class TestLateTransition:
    """Test the late-transition scenario."""

    def test_output_stays_high_then_switches(self, fast_model):
        """Test that the output holds near γ1 long after the ramp stops."""
        traj = analysis.late_transition_scenario(fast_model, 1e-9, slope=1e9)
        g = derive_geometry(fast_model)
        t_hold = (g.v_h + 1e-9 - g.v_l) / 1e9

        held = traj.window(0.0, t_hold + 10 * g.tau2)
        assert np.all(held.v_out > 0.99)
        assert traj.regions[-1] is Region.SATURATION_NEG
        assert analysis.monotonicity_verdict(traj, scale=1.0).is_monotone


@pytest.mark.unit
class TestMonotonicity:
    """Test the monotonicity verdict."""

    def test_strict(self):
        """Test a strictly decreasing sequence."""
        verdict = analysis.monotonicity_verdict(_trajectory([1.0, 0.5, 0.0, -1.0]))

        assert verdict.verdict == "strictly_monotone"
        assert verdict.direction == -1

    def test_plateaus(self):
        """Test flat stretches."""
        verdict = analysis.monotonicity_verdict(_trajectory([1.0, 1.0, 0.0, 0.0]))

        assert verdict.verdict == "monotone_with_plateaus"
        assert verdict.is_monotone

    def test_constant(self):
        """Test a constant output."""
        assert analysis.monotonicity_verdict(_trajectory([1.0, 1.0])).verdict == (
            "monotone_with_plateaus"
        )

    def test_reversal_witness(self):
        """Test the first reversal time."""
        verdict = analysis.monotonicity_verdict(_trajectory([1.0, 0.5, 0.7, 0.0]))

        assert verdict.verdict == "non_monotone"
        assert verdict.t_witness == 1.0
        assert not verdict.is_monotone

    def test_rounding_noise_ignored(self):
        """Test that differences below the tolerance count as flat."""
        verdict = analysis.monotonicity_verdict(_trajectory([1.0, 1.0 + 1e-15, 0.0]), scale=1.0)

        assert verdict.is_monotone


@pytest.mark.unit
class TestFits:
    """Test log-law fitting."""

    def test_exact_log_law(self):
        """Test slope and intercept recovery on synthetic data."""
        x = np.geomspace(1e-9, 1e-3, 7)
        y = 2e-12 * np.log(1.0 / x) + 5e-12

        fit = analysis.fit_log_law(x, y)

        assert fit.slope == pytest.approx(2e-12)
        assert fit.intercept == pytest.approx(5e-12)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.n_points == 7

    @pytest.mark.parametrize(
        "x, y",
        [
            ([1e-3, 1e-4], [1.0, 2.0]),
            ([1e-3, 1e-4, -1e-5], [1.0, 2.0, 3.0]),
            ([1e-3, 1e-3, 1e-3], [1.0, 2.0, 3.0]),
            ([1e-3, 1e-4, 1e-5], [1.0, 2.0]),
        ],
    )
    def test_degenerate(self, x, y):
        """Test too few points, bad abscissae and no spread."""
        with pytest.raises(DegenerateFitError):
            analysis.fit_log_law(x, y)

    def test_resolution_constant(self, fast_model):
        """Test that pinned releases recover τ2."""
        tau2 = derive_geometry(fast_model).tau2

        fit = analysis.fit_resolution_constant(fast_model, [1e-12, 1e-10, 1e-8, 1e-6], workers=1)

        assert fit.tau_fit == pytest.approx(tau2, rel=0.01)
        assert fit.r_squared > 0.999
        assert fit.exit_times == sorted(fit.exit_times, reverse=True)

    def test_resolution_needs_three_decades(self, fast_model):
        """Test that narrow delta ranges are refused."""
        with pytest.raises(DegenerateFitError):
            analysis.fit_resolution_constant(fast_model, [1e-8, 1e-7, 1e-6])
