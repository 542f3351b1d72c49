"""Pytest fixtures for preferential attachment tests."""

import sys
from pathlib import Path

import pytest

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from models import InitialDegreeModel, SimConfig
from pa_sim import build_stats, simulate


@pytest.fixture
def fixed_m5():
    """Every vertex brings five edges."""
    return InitialDegreeModel.degenerate(5)


@pytest.fixture
def uniform123():
    """Initial degrees uniform on {1, 2, 3}."""
    return InitialDegreeModel.uniform([1, 2, 3])


@pytest.fixture
def two_step_stats():
    """PA_2 with m = 1: v_2 joined v_0, degrees (2, 1, 1)."""
    return build_stats([2, 1, 1], [1, 1], delta=0.0)


@pytest.fixture
def star_stats():
    """PA_3 with m = 1 where v_3 joined the degree-2 vertex: degrees (3, 1, 1, 1)."""
    return build_stats([3, 1, 1, 1], [1, 1, 1], delta=0.0)


@pytest.fixture
def path_stats():
    """PA_3 with m = 1 where v_3 joined a leaf: degrees (2, 2, 1, 1)."""
    return build_stats([2, 2, 1, 1], [1, 1, 1], delta=0.0)


@pytest.fixture(scope="session")
def small_run():
    """Seeded PA_10000(0) with m = 5 and the full draw history."""
    return simulate(SimConfig(n=10_000, delta=0.0, initial_degrees=5, seed=1, record_history=True))


@pytest.fixture(scope="session")
def uniform_run():
    """Seeded PA_10000(0.5) with initial degrees uniform on {1, 2, 3}."""
    model = InitialDegreeModel.uniform([1, 2, 3])
    return simulate(SimConfig(n=10_000, delta=0.5, initial_degrees=model, seed=3))


@pytest.fixture(scope="session")
def large_run():
    """Seeded PA_150000(0) with m = 5."""
    return simulate(SimConfig(n=150_000, delta=0.0, initial_degrees=5, seed=2018))


@pytest.fixture(scope="session")
def mid_run():
    """Seeded PA_100000(0) with m = 5."""
    return simulate(SimConfig(n=100_000, delta=0.0, initial_degrees=5, seed=7))
