"""Tests for reading and writing run artefacts."""

import json
from datetime import datetime

import numpy as np
import pandas as pd
import pytest

from config import version_stamp
from degree_law import limit_law
from estimators import mle
from io_service import (
    HISTOGRAM_FILE,
    MANIFEST_FILE,
    STATS_FILE,
    load_pmf,
    load_report,
    load_stats,
    save_limit_law,
    save_pmf,
    save_report,
    save_stats,
    write_manifest,
)
from models import InitialDegreeModel, RunManifest, SimConfig, ValidationError
from pa_sim import simulate


@pytest.fixture(scope="module")
def tiny_run():
    model = InitialDegreeModel.uniform([1, 2, 3])
    return simulate(SimConfig(n=500, delta=0.5, initial_degrees=model, seed=12, record_history=True))


class TestStats:
    """Round trips through stats.json and degree_histogram.csv."""

    def test_full_round_trip(self, tiny_run, tmp_path):
        """Histogram, edge counts and metadata survive a save/load."""
        paths = save_stats(tiny_run, tmp_path)
        assert [p.name for p in paths] == [STATS_FILE, HISTOGRAM_FILE]

        loaded = load_stats(tmp_path)
        assert not loaded.is_snapshot
        np.testing.assert_array_equal(loaded.degree_hist, tiny_run.degree_hist)
        np.testing.assert_array_equal(loaded.m_seq, tiny_run.m_seq)
        np.testing.assert_array_equal(loaded.r_tail_counts, tiny_run.r_tail_counts)
        np.testing.assert_array_equal(loaded.history, tiny_run.history)
        assert (loaded.seed, loaded.delta) == (12, 0.5)
        assert loaded.model.mu == pytest.approx(2.0)

    def test_estimate_after_round_trip(self, tiny_run, tmp_path):
        """The MLE of the reloaded stats equals the MLE of the originals."""
        save_stats(tiny_run, tmp_path)
        assert mle(load_stats(tmp_path / STATS_FILE)).delta_hat == mle(tiny_run).delta_hat

    def test_snapshot_round_trip(self, tiny_run, tmp_path):
        """snapshot=True stores no edge-count history."""
        save_stats(tiny_run, tmp_path, snapshot=True)
        data = json.loads((tmp_path / STATS_FILE).read_text())
        assert data["m_seq"] is None
        loaded = load_stats(tmp_path)
        assert loaded.is_snapshot
        assert loaded.n == tiny_run.n
        assert loaded.total_edges == tiny_run.total_edges

    def test_histogram_csv(self, tiny_run, tmp_path):
        """The CSV lists the non-empty degrees and loads as a snapshot."""
        save_stats(tiny_run, tmp_path)
        df = pd.read_csv(tmp_path / HISTOGRAM_FILE)
        assert list(df.columns) == ["k", "N_k"]
        assert (df["N_k"] > 0).all()
        assert df["N_k"].sum() == tiny_run.n + 1

        loaded = load_stats(tmp_path / HISTOGRAM_FILE)
        assert loaded.is_snapshot
        assert loaded.total_edges == tiny_run.total_edges

    def test_same_seed_same_bytes(self, tmp_path):
        """Two runs from one seed write identical histogram files."""
        config = SimConfig(n=300, delta=0.0, initial_degrees=2, seed=5)
        save_stats(simulate(config), tmp_path / "a")
        save_stats(simulate(config), tmp_path / "b")
        a = (tmp_path / "a" / HISTOGRAM_FILE).read_bytes()
        b = (tmp_path / "b" / HISTOGRAM_FILE).read_bytes()
        assert a == b

    def test_odd_degree_sum(self, tmp_path):
        """A histogram with an odd degree sum is not a graph."""
        path = tmp_path / "bad.csv"
        path.write_text("k,N_k\n1,3\n2,1\n")
        with pytest.raises(ValidationError, match="odd degree sum"):
            load_stats(path)

    def test_edge_count_mismatch(self, tiny_run, tmp_path):
        """total_edges in stats.json must agree with the histogram."""
        save_stats(tiny_run, tmp_path, snapshot=True)
        data = json.loads((tmp_path / STATS_FILE).read_text())
        data["total_edges"] += 1
        (tmp_path / STATS_FILE).write_text(json.dumps(data))
        with pytest.raises(ValidationError, match="edges"):
            load_stats(tmp_path / STATS_FILE)

    def test_missing_input(self, tmp_path):
        """An empty directory is not a run."""
        with pytest.raises(ValidationError):
            load_stats(tmp_path)

    def test_wrong_format(self, tmp_path):
        """A JSON file of another kind is rejected."""
        path = tmp_path / STATS_FILE
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValidationError):
            load_stats(path)


class TestPmf:
    """Tests for initial degree law files."""

    def test_round_trip(self, tmp_path, uniform123):
        """save_pmf and load_pmf agree."""
        path = save_pmf(uniform123, tmp_path / "r.csv")
        assert load_pmf(path).pmf == pytest.approx(uniform123.pmf)

    def test_missing_column(self, tmp_path):
        """Columns k and r_k are required."""
        path = tmp_path / "r.csv"
        path.write_text("k,p\n1,1.0\n")
        with pytest.raises(ValidationError, match="r_k"):
            load_pmf(path)

    def test_not_normalized(self, tmp_path):
        """Probabilities far from summing to one are rejected."""
        path = tmp_path / "r.csv"
        path.write_text("k,r_k\n1,0.5\n2,0.3\n")
        with pytest.raises(ValidationError, match="sums to"):
            load_pmf(path)

    def test_rounded_file_is_accepted(self, tmp_path):
        """Hand-rounded thirds load and are renormalized."""
        path = tmp_path / "r.csv"
        path.write_text("k,r_k\n1,0.3333333\n2,0.3333333\n3,0.3333334\n")
        assert sum(load_pmf(path).pmf.values()) == pytest.approx(1.0, abs=1e-15)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="not found"):
            load_pmf(tmp_path / "nope.csv")


class TestReports:
    """Tests for estimate reports, laws and manifests."""

    def test_report_round_trip(self, tiny_run, tmp_path):
        """A saved report loads back with its CI."""
        report = mle(tiny_run)
        path = save_report(report, tmp_path / "estimate_mle.json", {"input": "x"})
        loaded = load_report(path)
        assert loaded.delta_hat == report.delta_hat
        assert loaded.ci == report.ci
        assert loaded.boundary_hit == report.boundary_hit

    def test_report_carries_version_stamp(self, tiny_run, tmp_path):
        """Reports are stamped like manifests, with the git hash when available."""
        path = save_report(mle(tiny_run), tmp_path / "estimate_mle.json")
        assert json.loads(path.read_text())["app_version"] == version_stamp()

    def test_flat_report_is_strict_json(self, two_step_stats, tmp_path):
        """NaN estimates are written as null, never as NaN."""
        path = save_report(mle(two_step_stats), tmp_path / "flat.json")
        text = path.read_text()
        assert "NaN" not in text
        assert json.loads(text)["report"]["delta_hat"] is None
        assert np.isnan(load_report(path).delta_hat)

    def test_limit_law_csv(self, tmp_path):
        """The law table starts at k = 1 with p_1 = theta/(1+delta+theta) = 6/11 for m = 1, delta = 4."""
        path = save_limit_law(limit_law(4.0, InitialDegreeModel.degenerate(1)), tmp_path / "law.csv")
        df = pd.read_csv(path)
        assert list(df.columns) == ["k", "p_k", "p_gt_k", "q_k"]
        assert df["p_k"].iloc[0] == pytest.approx(6 / 11, abs=1e-15)

    def test_manifest(self, tmp_path):
        """The manifest records config, seed and outputs."""
        manifest = RunManifest(
            subcommand="simulate",
            config={"n": 10},
            seed=3,
            version="1.0.0",
            started_at=datetime.now().isoformat(),
            outputs=["stats.json"],
        )
        data = json.loads(write_manifest(manifest, tmp_path).read_text())
        assert (tmp_path / MANIFEST_FILE).exists()
        assert data["seed"] == 3
        assert data["outputs"] == ["stats.json"]
