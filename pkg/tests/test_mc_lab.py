"""Tests for the Monte Carlo harness."""

import json

import numpy as np
import pandas as pd
import pytest

from degree_law import nu0, predicted_variance, qmle_variance
from io_service import ESTIMATES_FILE, MC_HISTOGRAM_FILE, SUMMARY_FILE
from mc_lab import (
    _run_replicate,
    aggregate,
    convergence_probe,
    estimator_target,
    run_mc,
    summary_table,
)
from models import InitialDegreeModel, McConfig, SimConfig, ValidationError


def small_study(**overrides):
    values = dict(
        replicates=4,
        sim=SimConfig(n=2000, delta=0.0, initial_degrees=2),
        estimators=("mle", "mle_fixed_m", "loglog"),
        base_seed=123,
    )
    values.update(overrides)
    return McConfig(**values)


@pytest.fixture(scope="module")
def small_summary():
    return run_mc(small_study())


class TestRunMc:
    """Tests for run_mc and its summaries."""

    def test_counts(self, small_summary):
        """Every estimator sees every replicate of a healthy study."""
        assert small_summary.failure_count == 0
        for kind in ("mle", "mle_fixed_m", "loglog"):
            assert small_summary.summaries[kind].count == 4
            assert len(small_summary.estimates[kind]) == 4
        assert len(small_summary.rows) == 12

    def test_variance_and_mse(self, small_summary):
        """Sample variance uses ddof = 1 and MSE = bias^2 + variance."""
        for kind, s in small_summary.summaries.items():
            values = small_summary.estimates[kind]
            assert s.sample_variance == pytest.approx(np.var(values, ddof=1))
            assert s.mean == pytest.approx(values.mean())
            assert s.mse == pytest.approx(s.bias**2 + s.sample_variance)
            assert s.minimum <= s.median <= s.maximum

    def test_predicted_variance(self, small_summary):
        """The MLEs carry 1/(nu0 n); the log-log baseline carries none."""
        expected = predicted_variance(nu0(0.0, InitialDegreeModel.degenerate(2)), 2000)
        assert small_summary.summaries["mle"].predicted_variance == pytest.approx(expected)
        assert small_summary.summaries["mle_fixed_m"].predicted_variance == pytest.approx(expected)
        assert small_summary.summaries["loglog"].predicted_variance is None

    def test_fixed_m_agrees_with_full_history(self, small_summary):
        """Snapshot and full-history estimates coincide replicate by replicate."""
        np.testing.assert_allclose(
            small_summary.estimates["mle_fixed_m"], small_summary.estimates["mle"], atol=1e-6
        )

    def test_histogram_counts(self, small_summary):
        """Histogram counts add up to the number of estimates."""
        for s in small_summary.summaries.values():
            assert sum(row["count"] for row in s.histogram) == s.count

    def test_workers_do_not_change_results(self):
        """Parallel replicates give the same estimates in the same order."""
        serial = run_mc(small_study(estimators=("mle",)))
        parallel = run_mc(small_study(estimators=("mle",), workers=2))
        np.testing.assert_array_equal(serial.estimates["mle"], parallel.estimates["mle"])

    def test_single_replicate(self):
        """With R = 1 the variance is undefined and min = max = mean."""
        summary = run_mc(small_study(replicates=1, estimators=("mle",)))
        s = summary.summaries["mle"]
        assert s.sample_variance is None
        assert s.mse is None
        assert s.minimum == s.maximum == s.mean

    def test_failures_are_recorded(self):
        """PA_2 is flat for the MLEs and too small for the log-log fit."""
        config = small_study(replicates=3, sim=SimConfig(n=2, delta=0.0, initial_degrees=1))
        summary = run_mc(config)
        assert summary.failure_count == 9
        assert {f["stage"] for f in summary.failures} == {"mle", "mle_fixed_m", "loglog"}
        assert all(s.count == 0 for s in summary.summaries.values())
        assert summary.summaries["mle"].mean is None

    def test_writes_outputs(self, tmp_path):
        """estimates.csv, summary.json and histogram.csv land in out_dir."""
        summary = run_mc(small_study(estimators=("mle",)), out_dir=tmp_path)
        estimates = pd.read_csv(tmp_path / ESTIMATES_FILE)
        assert list(estimates["replicate"]) == [0, 1, 2, 3]
        np.testing.assert_allclose(estimates["delta_hat"], summary.estimates["mle"])

        data = json.loads((tmp_path / SUMMARY_FILE).read_text())
        assert data["replicates"] == 4
        assert data["summaries"]["mle"]["count"] == 4

        hist = pd.read_csv(tmp_path / MC_HISTOGRAM_FILE)
        assert hist["count"].sum() == 4


class TestAggregate:
    """Tests for folding replicate outcomes."""

    def test_order_independent(self):
        """Outcomes arriving out of order are sorted by replicate."""
        config = small_study(estimators=("mle",))
        summary = run_mc(config)

        outcomes = [_run_replicate((config, r)) for r in reversed(range(config.replicates))]
        again = aggregate(config, outcomes)
        np.testing.assert_array_equal(again.estimates["mle"], summary.estimates["mle"])

    def test_simulation_error_is_a_failure(self):
        """An error dict from a replicate shows up in failures."""
        config = small_study(replicates=1, estimators=("mle",))
        outcome = {"replicate": 0, "reports": {}, "errors": {"simulate": "RuntimeError: boom"}}
        summary = aggregate(config, [outcome])
        assert summary.failures[0]["stage"] == "simulate"
        assert summary.summaries["mle"].count == 0

    def test_loglog_target(self):
        """The raw log-log fit is compared against delta0/mu."""
        config = small_study(sim=SimConfig(n=100, delta=1.0, initial_degrees=2))
        assert estimator_target("loglog", config) == 0.5
        assert estimator_target("mle", config) == 1.0

    def test_summary_table(self, small_summary):
        """One row per estimator with the summary columns."""
        table = summary_table(small_summary)
        assert list(table.columns) == [
            "Estimator", "Min", "Median", "Mean", "Max", "Samp. Var.", "Pred. Var."
        ]
        assert list(table["Estimator"]) == ["mle", "mle_fixed_m", "loglog"]


class TestConvergenceProbe:
    """Tests for the empirical degree law against its limit."""

    def test_first_step(self):
        """At t = 1 with m = 5, delta = 0: p_5(1) = 1 against p_5 = 2/7."""
        table = convergence_probe(SimConfig(n=10, delta=0.0, initial_degrees=5), [1])
        assert table["sup_distance"].iloc[0] == pytest.approx(5 / 7)
        assert table["vertices"].iloc[0] == 2

    def test_needs_checkpoints(self):
        """An empty checkpoint list is rejected."""
        with pytest.raises(ValidationError):
            convergence_probe(SimConfig(n=10, delta=0.0, initial_degrees=5), [])

    def test_distance_shrinks(self):
        """The mean sup distance over 20 runs decreases with t."""
        checkpoints = [100, 1000, 10_000]
        distances = np.zeros(len(checkpoints))
        for r in range(20):
            config = SimConfig(n=10_000, delta=0.0, initial_degrees=5, seed=8, replicate=r)
            distances += convergence_probe(config, checkpoints)["sup_distance"].to_numpy()
        assert distances[0] > distances[1] > distances[2]

    @pytest.mark.slow
    def test_close_at_large_n(self):
        """sup_k |p_k(n) - p_k| < 0.01 at n = 150000."""
        config = SimConfig(n=150_000, delta=0.0, initial_degrees=5, seed=21)
        table = convergence_probe(config, [150_000])
        assert table["sup_distance"].iloc[0] < 0.01


@pytest.mark.slow
class TestAcceptance:
    """Large studies checked against the asymptotic predictions."""

    def test_mle_sampling_distribution(self):
        """n = 150000, m = 5, delta0 = 0: centred, with variance near 1/(nu0 n)."""
        config = McConfig(
            replicates=500,
            sim=SimConfig(n=150_000, delta=0.0, initial_degrees=5),
            base_seed=20180101,
            workers=4,
        )
        s = run_mc(config).summaries["mle"]
        assert s.count == 500
        assert abs(s.mean) < 0.0025
        assert 0.00028 <= s.sample_variance <= 0.00040
        assert max(abs(s.minimum), abs(s.maximum)) < 0.09
        assert s.predicted_variance == pytest.approx(0.00033594, rel=0.005)

    @pytest.mark.parametrize("delta0", [0.0, 1.0])
    def test_qmle_variance_inflation(self, uniform123, delta0):
        """Hiding the initial degrees inflates the variance as predicted."""
        config = McConfig(
            replicates=500,
            sim=SimConfig(n=100_000, delta=delta0, initial_degrees=uniform123),
            estimators=("mle", "qmle"),
            base_seed=7,
            workers=4,
        )
        summary = run_mc(config)
        q, m = summary.summaries["qmle"], summary.summaries["mle"]
        predicted = qmle_variance(delta0, uniform123, 100_000)
        assert q.sample_variance == pytest.approx(predicted, rel=0.25)
        assert q.sample_variance >= 0.9 * m.sample_variance

    def test_interval_coverage(self):
        """Between 930 and 970 of 1000 intervals at n = 10^4 cover delta0."""
        config = McConfig(
            replicates=1000,
            sim=SimConfig(n=10_000, delta=0.0, initial_degrees=5),
            base_seed=99,
            workers=4,
        )
        s = run_mc(config).summaries["mle"]
        assert s.ci_emitted == 1000
        assert 930 <= s.ci_covered <= 970

    def test_loglog_is_worse_than_mle(self):
        """Over 100 runs at n = 150000 the MLE sits closer to delta0 than the raw log-log fit."""
        config = McConfig(
            replicates=100,
            sim=SimConfig(n=150_000, delta=0.0, initial_degrees=5),
            estimators=("mle", "loglog"),
            base_seed=5,
            workers=4,
        )
        summary = run_mc(config)
        mle_error = np.median(np.abs(summary.estimates["mle"]))
        loglog_error = np.median(np.abs(summary.estimates["loglog"]))
        assert mle_error < loglog_error
