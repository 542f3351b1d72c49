"""Configuration management for simulation, estimation and Monte Carlo runs."""

import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import load_dotenv

from models import APP_VERSION
from settings_manager import load_settings, parse_bins

# Load defaults from settings.ini (written with defaults if missing)
_settings = load_settings()

REPO_ROOT = Path(__file__).parent.parent


def version_stamp() -> str:
    """Library version, with the git short hash when run from a checkout."""
    try:
        result = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=REPO_ROOT,
            capture_output=True,
            text=True,
            timeout=2,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return APP_VERSION
    commit = result.stdout.strip()
    return f"{APP_VERSION}+g{commit}" if result.returncode == 0 and commit else APP_VERSION


@dataclass
class SimulationConfig:
    """Defaults for a single simulated network."""

    n: int = _settings["n"]
    delta: float = _settings["delta"]
    m: int = _settings["m"]
    seed: int = _settings["seed"]


@dataclass
class EstimationConfig:
    """Root-finding and interval settings."""

    bracket: tuple[float, float] = (_settings["bracket_lower"], _settings["bracket_upper"])
    tol: float = _settings["tol"]
    alpha: float = _settings["alpha"]


@dataclass
class MonteCarloConfig:
    """Monte Carlo study defaults."""

    replicates: int = _settings["replicates"]
    workers: int = _settings["workers"]
    histogram_bins: str | int = _settings["histogram_bins"]


@dataclass
class LimitsConfig:
    """Series truncation for the limiting law and variance constants."""

    tail_tol: float = _settings["tail_tol"]


@dataclass
class OutputConfig:
    """Where run directories go by default."""

    out_dir: Path = field(default_factory=lambda: Path(_settings["out_dir"]))


@dataclass
class LoggingConfig:
    """Logging configuration."""

    logs_dir: Path = field(default_factory=lambda: Path(_settings["logs_dir"]))
    level: str = "DEBUG"


class Config:
    """Main configuration container."""

    def __init__(self):
        load_dotenv()

        self.simulation = SimulationConfig()
        self.estimation = EstimationConfig()
        self.monte_carlo = MonteCarloConfig()
        self.limits = LimitsConfig()
        self.output = OutputConfig()
        self.logging = LoggingConfig()

    @classmethod
    def from_env(cls) -> "Config":
        """Create config from environment variables (overrides settings.ini)."""
        config = cls()

        if workers := os.getenv("PA_WORKERS"):
            config.monte_carlo.workers = _positive_int("PA_WORKERS", workers)

        if level := os.getenv("PA_LOG_LEVEL"):
            config.logging.level = level.strip().upper()

        if tail_tol := os.getenv("PA_TAIL_TOL"):
            value = float(tail_tol)
            if not 0 < value < 1:
                raise ValueError("PA_TAIL_TOL must be between 0 and 1")
            config.limits.tail_tol = value

        if bins := os.getenv("PA_HISTOGRAM_BINS"):
            config.monte_carlo.histogram_bins = parse_bins(bins)

        return config


def _positive_int(name: str, raw: str) -> int:
    try:
        value = int(raw)
    except ValueError as e:
        raise ValueError(f"{name} must be an integer (got {raw!r})") from e
    if value < 1:
        raise ValueError(f"{name} must be at least 1 (got {value})")
    return value
