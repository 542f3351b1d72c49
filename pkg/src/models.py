"""Data models for the preferential attachment toolkit."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

APP_VERSION = "1.0.0"
PMF_TOL = 1e-12

ESTIMATOR_KINDS = ("mle", "mle_fixed_m", "qmle", "loglog")
BOUNDARY_STATUSES = ("none", "lower", "upper", "flat")


class ValidationError(ValueError):
    """Malformed input: non-normalized pmf, bad bracket, inconsistent histogram."""


class DomainError(ValidationError):
    """Parameter outside its domain (delta <= -1, non-positive total preference)."""


class TruncationError(RuntimeError):
    """Series truncation was too aggressive for a variance constant."""


def check_delta(delta: float, name: str = "delta") -> float:
    """Validate the affine parameter domain delta > -1."""
    delta = float(delta)
    if not np.isfinite(delta) or delta <= -1.0:
        raise DomainError(f"{name} must satisfy {name} > -1 (got {delta})")
    return delta


@dataclass(frozen=True)
class InitialDegreeModel:
    """Probability law (r_k) of the number of edges a new vertex brings.

    The pmf is stored as a mapping k -> r_k over a finite support in {1, 2, ...}.
    Models derived from an unbounded family are cut at `k_max`, renormalized, and
    flagged with `truncated=True` and the `dropped_mass` they lost.
    """

    pmf: dict[int, float]
    truncated: bool = False
    dropped_mass: float = 0.0

    def __post_init__(self):
        if not self.pmf:
            raise ValidationError("Initial degree pmf is empty")

        cleaned: dict[int, float] = {}
        for k, prob in sorted(self.pmf.items()):
            k = int(k)
            prob = float(prob)
            if k < 1:
                raise ValidationError(f"Initial degrees must be >= 1 (got k={k})")
            if not np.isfinite(prob) or prob < 0:
                raise ValidationError(f"r_{k} must be a non-negative probability (got {prob})")
            if prob > 0:
                cleaned[k] = prob

        total = sum(cleaned.values())
        if abs(total - 1.0) > PMF_TOL:
            raise ValidationError(f"Initial degree pmf sums to {total!r}, expected 1")

        object.__setattr__(self, "pmf", cleaned)

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def degenerate(cls, m: int) -> InitialDegreeModel:
        """Every vertex arrives with exactly m edges."""
        if int(m) != m or m < 1:
            raise ValidationError(f"m must be a positive integer (got {m})")
        return cls({int(m): 1.0})

    @classmethod
    def uniform(cls, values) -> InitialDegreeModel:
        values = sorted({int(v) for v in values})
        if not values:
            raise ValidationError("uniform() needs at least one value")
        prob = 1.0 / len(values)
        pmf = {v: prob for v in values}
        # absorb rounding so the pmf is normalized to the last ulp
        pmf[values[-1]] = 1.0 - prob * (len(values) - 1)
        return cls(pmf)

    @classmethod
    def from_pmf(cls, pmf: dict[int, float], normalize: bool = False) -> InitialDegreeModel:
        if normalize:
            total = sum(pmf.values())
            if total <= 0:
                raise ValidationError("pmf has no mass")
            pmf = {k: v / total for k, v in pmf.items()}
        return cls(dict(pmf))

    @classmethod
    def geometric(cls, p: float, k_max: int) -> InitialDegreeModel:
        """Geometric law r_k = (1-p)^(k-1) p on {1, ..., k_max}, renormalized."""
        if not 0 < p <= 1:
            raise ValidationError(f"geometric success probability must be in (0, 1] (got {p})")
        if k_max < 1:
            raise ValidationError(f"k_max must be >= 1 (got {k_max})")
        ks = np.arange(1, k_max + 1)
        raw = (1.0 - p) ** (ks - 1) * p
        kept = float(raw.sum())
        probs = raw / kept
        probs[-1] = 1.0 - probs[:-1].sum()
        return cls(
            {int(k): float(v) for k, v in zip(ks, probs, strict=True)},
            truncated=kept < 1.0,
            dropped_mass=1.0 - kept,
        )

    @classmethod
    def from_file(cls, path: Path) -> InitialDegreeModel:
        from io_service import load_pmf

        return load_pmf(path)

    # ------------------------------------------------------------------
    # Moments and tails
    # ------------------------------------------------------------------

    @property
    def support(self) -> np.ndarray:
        return np.fromiter(self.pmf.keys(), dtype=np.int64)

    @property
    def probs(self) -> np.ndarray:
        return np.fromiter(self.pmf.values(), dtype=float)

    @property
    def support_max(self) -> int:
        return max(self.pmf)

    @property
    def support_min(self) -> int:
        return min(self.pmf)

    @property
    def is_degenerate(self) -> bool:
        return len(self.pmf) == 1

    @property
    def mu(self) -> float:
        return float(np.dot(self.support, self.probs))

    @property
    def mu2(self) -> float:
        return float(np.dot(self.support.astype(float) ** 2, self.probs))

    @property
    def variance(self) -> float:
        return max(self.mu2 - self.mu**2, 0.0)

    def dense(self, k_max: int | None = None) -> np.ndarray:
        """r_k as an array indexed by k = 0..k_max (r_0 = 0)."""
        k_max = self.support_max if k_max is None else k_max
        r = np.zeros(max(k_max, self.support_max) + 1)
        r[self.support] = self.probs
        return r[: k_max + 1]

    def tails(self, k_max: int | None = None) -> np.ndarray:
        """r_{>k} for k = 0..k_max."""
        k_max = self.support_max if k_max is None else k_max
        r = self.dense(max(k_max, self.support_max))
        tail = np.concatenate([np.cumsum(r[::-1])[::-1][1:], [0.0]])
        return tail[: k_max + 1]

    def tail(self, k: int) -> float:
        return float(sum(prob for j, prob in self.pmf.items() if j > k))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw iid initial degrees; a shorter draw is a prefix of a longer one."""
        if self.is_degenerate:
            return np.full(size, self.support_min, dtype=np.int64)
        cdf = np.cumsum(self.probs)
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return self.support[np.minimum(idx, len(cdf) - 1)]

    def describe(self) -> dict[str, Any]:
        return {
            "pmf": {str(k): v for k, v in self.pmf.items()},
            "mu": self.mu,
            "mu2": self.mu2,
            "truncated": self.truncated,
            "dropped_mass": self.dropped_mass,
        }


@dataclass(frozen=True, eq=False)
class LimitLaw:
    """Limiting degree law p_k at (delta, r), stored for k = 0..K_trunc with p_0 = 0."""

    delta: float
    theta: float
    mu: float
    p: np.ndarray
    p_tail: np.ndarray
    q: np.ndarray
    trunc_mass: float
    q_trunc: float
    warnings: list[str] = field(default_factory=list)

    @property
    def k_trunc(self) -> int:
        return len(self.p) - 1

    @property
    def ks(self) -> np.ndarray:
        return np.arange(len(self.p))


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one simulated network PA_n(delta)."""

    n: int
    delta: float
    initial_degrees: InitialDegreeModel | int
    seed: int = 0
    replicate: int = 0
    record_history: bool = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"n must be an integer >= 2 (got {self.n})")
        check_delta(self.delta)
        if self.seed < 0 or self.seed >= 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer (got {self.seed})")
        if self.replicate < 0:
            raise ValidationError(f"replicate must be >= 0 (got {self.replicate})")
        if isinstance(self.initial_degrees, int):
            object.__setattr__(
                self, "initial_degrees", InitialDegreeModel.degenerate(self.initial_degrees)
            )

    @property
    def model(self) -> InitialDegreeModel:
        return self.initial_degrees

    def describe(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "delta": self.delta,
            "seed": self.seed,
            "replicate": self.replicate,
            "record_history": self.record_history,
            "model": self.model.describe(),
        }


@dataclass(frozen=True, eq=False)
class EvolutionStats:
    """Sufficient statistics of an observed network.

    Arrays indexed by degree k start at k = 0. Snapshot statistics carry only what
    the final network shows: the degree histogram and the total edge count.
    """

    n: int
    degree_hist: np.ndarray
    tail_counts: np.ndarray
    total_edges: int
    r_tail_counts: np.ndarray | None = None
    m_seq: np.ndarray | None = None
    cum_edges: np.ndarray | None = None
    history: np.ndarray | None = None
    delta: float | None = None
    seed: int | None = None
    replicate: int | None = None
    model: InitialDegreeModel | None = None

    @property
    def is_snapshot(self) -> bool:
        return self.m_seq is None

    @property
    def max_degree(self) -> int:
        return len(self.degree_hist) - 1

    @property
    def vertex_count(self) -> int:
        return int(self.degree_hist.sum())

    def metadata(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "delta": self.delta,
            "seed": self.seed,
            "replicate": self.replicate,
            "model": self.model.describe() if self.model is not None else None,
            "snapshot": self.is_snapshot,
        }


@dataclass
class EstimateReport:
    """Outcome of one estimator run."""

    estimator_kind: str
    delta_hat: float
    bracket: tuple[float, float] | None
    converged: bool
    boundary_hit: str = "none"
    observed_info: float | None = None
    ci: tuple[float, float] | None = None
    alpha: float = 0.05
    score_at_estimate: float | None = None
    iterations: int = 0
    n: int = 0
    variance: float | None = None
    mu: float | None = None
    tau_hat: float | None = None
    tau_ci: tuple[float, float] | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.estimator_kind not in ESTIMATOR_KINDS:
            raise ValidationError(f"Unknown estimator kind '{self.estimator_kind}'")
        if self.boundary_hit not in BOUNDARY_STATUSES:
            raise ValidationError(f"Unknown boundary status '{self.boundary_hit}'")

    @property
    def has_ci(self) -> bool:
        return self.ci is not None

    def covers(self, value: float) -> bool:
        return self.ci is not None and self.ci[0] <= value <= self.ci[1]

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, float) and not np.isfinite(value):
                data[key] = None
        return data


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo study: R seeded replicates of simulate -> estimate."""

    replicates: int
    sim: SimConfig
    estimators: tuple[str, ...] = ("mle",)
    base_seed: int = 0
    workers: int = 1
    histogram_bins: str | int = "fd"
    alpha: float = 0.05
    bracket: tuple[float, float] = (-0.99, 25.0)
    tol: float = 1e-8
    qmle_model: InitialDegreeModel | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError(f"replicates must be >= 1 (got {self.replicates})")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1 (got {self.workers})")
        unknown = [e for e in self.estimators if e not in ESTIMATOR_KINDS]
        if unknown or not self.estimators:
            raise ValidationError(f"Invalid estimators: {unknown}. Available: {ESTIMATOR_KINDS}")
        if "mle_fixed_m" in self.estimators and not self.sim.model.is_degenerate:
            raise ValidationError("mle_fixed_m needs a degenerate initial degree model")
        if not 0 < self.alpha < 1:
            raise ValidationError(f"alpha must be in (0, 1) (got {self.alpha})")

    @property
    def delta0(self) -> float:
        return self.sim.delta

    def replicate_config(self, replicate: int) -> SimConfig:
        return SimConfig(
            n=self.sim.n,
            delta=self.sim.delta,
            initial_degrees=self.sim.model,
            seed=self.base_seed,
            replicate=replicate,
            record_history=False,
        )


@dataclass
class EstimatorSummary:
    """Sampling distribution of one estimator across replicates."""

    estimator: str
    count: int
    minimum: float | None
    median: float | None
    mean: float | None
    maximum: float | None
    sample_variance: float | None
    predicted_variance: float | None
    bias: float | None
    mse: float | None
    mean_std_error: float | None
    boundary_hits: int
    ci_emitted: int
    ci_covered: int
    histogram: list[dict[str, float]] = field(default_factory=list)
    normal_asymptotic: tuple[float, float] | None = None
    normal_bestfit: tuple[float, float] | None = None

    @property
    def coverage(self) -> float | None:
        return self.ci_covered / self.ci_emitted if self.ci_emitted else None


@dataclass
class McSummary:
    """Aggregated result of a Monte Carlo study."""

    replicates: int
    delta0: float
    n: int
    estimates: dict[str, np.ndarray]
    summaries: dict[str, EstimatorSummary]
    failures: list[dict[str, Any]] = field(default_factory=list)
    rows: list[dict[str, Any]] = field(default_factory=list)

    @property
    def failure_count(self) -> int:
        return len(self.failures)

    def to_dict(self) -> dict[str, Any]:
        return {
            "replicates": self.replicates,
            "delta0": self.delta0,
            "n": self.n,
            "failure_count": self.failure_count,
            "failures": self.failures,
            "summaries": {k: asdict(v) for k, v in self.summaries.items()},
        }


@dataclass
class RunManifest:
    """Everything needed to reproduce one CLI run."""

    subcommand: str
    config: dict[str, Any]
    seed: int | None
    version: str
    started_at: str
    finished_at: str = ""
    outputs: list[str] = field(default_factory=list)
