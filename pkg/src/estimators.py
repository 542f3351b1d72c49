"""Likelihood-based estimators of the affine parameter delta.

Every likelihood here is normalized by n+1 (the vertex count) and drops the
delta-free part of the full log-likelihood.
"""

import logging
import math

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.stats import norm

from degree_law import nu_tilde0
from models import (
    DomainError,
    EstimateReport,
    EvolutionStats,
    InitialDegreeModel,
    ValidationError,
    check_delta,
)

logger = logging.getLogger(__name__)

DEFAULT_BRACKET = (-0.99, 25.0)
DEFAULT_TOL = 1e-8
DEFAULT_ALPHA = 0.05
FLAT_TOL = 1e-12
FLAT_GRID = 9


# ============================================================================
# Likelihoods
# ============================================================================


class _Likelihood:
    """Shared k-sum part: sum_k w_k log(k+delta) with w_k = N_{>k}/(n+1) - (initial part)."""

    kind = ""

    def __init__(self, n: int, weights: np.ndarray):
        self.n = n
        self.vertices = n + 1
        ks = np.arange(len(weights), dtype=float)
        keep = (ks >= 1) & (weights != 0)
        self.ks = ks[keep]
        self.weights = weights[keep]

    def _k_terms(self, delta: float, power: int) -> float:
        shifted = self.ks + delta
        if power == 0:
            return float(np.dot(self.weights, np.log(shifted)))
        return float(np.dot(self.weights, shifted ** (-power)))

    def value(self, delta: float) -> float:
        raise NotImplementedError

    def score(self, delta: float) -> float:
        raise NotImplementedError

    def hessian(self, delta: float) -> float:
        raise NotImplementedError


class _PreferenceSum:
    """sum_{t=2}^n sum_{i=1}^{m_t} of log S, t/S and t^2/S^2, S = t*delta + 2M_{t-1} + (i-1)."""

    def __init__(self, m_seq: np.ndarray):
        m_seq = np.asarray(m_seq, dtype=np.int64)
        steps = m_seq[1:]
        times = np.arange(2, len(m_seq) + 1, dtype=np.int64)
        prev_edges = np.cumsum(m_seq)[:-1]
        total = int(steps.sum())
        starts = np.cumsum(steps) - steps
        offsets = np.arange(total, dtype=np.int64) - np.repeat(starts, steps)
        self.t = np.repeat(times, steps).astype(float)
        self.base = (2 * np.repeat(prev_edges, steps) + offsets).astype(float)

    def preferences(self, delta: float) -> np.ndarray:
        s = self.t * delta + self.base
        if len(s) and s.min() <= 0:
            raise DomainError(f"Total preference S_(t,i-1)(delta) <= 0 at delta={delta}")
        return s

    def log_sum(self, delta: float) -> float:
        return float(np.sum(np.log(self.preferences(delta))))

    def first(self, delta: float) -> float:
        return float(np.sum(self.t / self.preferences(delta)))

    def second(self, delta: float) -> float:
        return float(np.sum((self.t / self.preferences(delta)) ** 2))


class FullLikelihood(_Likelihood):
    """iota_n from the evolution: histogram plus the edge-count history (m_t)."""

    kind = "mle"

    def __init__(self, stats: EvolutionStats):
        if stats.r_tail_counts is None or stats.m_seq is None:
            raise ValidationError(
                "The full-history MLE needs R_(>k) and (m_t); a snapshot carries neither. "
                "Use mle_fixed_m for fixed initial degrees or qmle with a known initial degree law."
            )
        width = max(len(stats.tail_counts), len(stats.r_tail_counts))
        tails = _padded(stats.tail_counts, width) - _padded(stats.r_tail_counts, width)
        super().__init__(stats.n, tails / (stats.n + 1))
        self.preference = _PreferenceSum(stats.m_seq)

    def value(self, delta: float) -> float:
        delta = check_delta(delta)
        return self._k_terms(delta, 0) - self.preference.log_sum(delta) / self.vertices

    def score(self, delta: float) -> float:
        delta = check_delta(delta)
        return self._k_terms(delta, 1) - self.preference.first(delta) / self.vertices

    def hessian(self, delta: float) -> float:
        delta = check_delta(delta)
        return -self._k_terms(delta, 2) + self.preference.second(delta) / self.vertices


class FixedMLikelihood(FullLikelihood):
    """iota_n for fixed initial degree m, built from the snapshot alone.

    R_{>k}(n) = (n+1) 1{k<m} and M_{t-1} = m(t-1) are implied by m, so the
    result is the full-history likelihood exactly.
    """

    kind = "mle_fixed_m"

    def __init__(self, snapshot: EvolutionStats, m: int):
        n = snapshot.n
        width = len(snapshot.tail_counts)
        initial = np.zeros(max(width, m + 1))
        initial[:m] = 1.0
        tails = _padded(snapshot.tail_counts, len(initial)) / (n + 1) - initial
        _Likelihood.__init__(self, n, tails)
        self.preference = _PreferenceSum(np.full(n, m, dtype=np.int64))


class QuasiLikelihood(_Likelihood):
    """Quasi-likelihood with the known law r in place of the initial-degree history."""

    kind = "qmle"

    def __init__(self, snapshot: EvolutionStats, r: InitialDegreeModel, mu: float | None = None):
        width = max(len(snapshot.tail_counts), r.support_max + 1)
        tails = _padded(snapshot.tail_counts, width) / (snapshot.n + 1) - r.tails(width - 1)
        super().__init__(snapshot.n, tails)
        self.mu = r.mu if mu is None else float(mu)

    def value(self, delta: float) -> float:
        delta = check_delta(delta)
        return self._k_terms(delta, 0) - self.mu * math.log(2 * self.mu + delta)

    def score(self, delta: float) -> float:
        delta = check_delta(delta)
        return self._k_terms(delta, 1) - 1.0 / (2.0 + delta / self.mu)

    def hessian(self, delta: float) -> float:
        delta = check_delta(delta)
        return -self._k_terms(delta, 2) + self.mu / (2 * self.mu + delta) ** 2


def _padded(array: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros(width)
    out[: len(array)] = array
    return out


# ============================================================================
# iota_n and its derivatives
# ============================================================================


def iota_n(delta: float, stats: EvolutionStats) -> float:
    """Normalized log-likelihood iota_n(delta) from the full evolution."""
    return FullLikelihood(stats).value(delta)


def iota_n_prime(delta: float, stats: EvolutionStats) -> float:
    """Score iota_n'(delta)."""
    return FullLikelihood(stats).score(delta)


def iota_n_second(delta: float, stats: EvolutionStats) -> float:
    """Second derivative iota_n''(delta)."""
    return FullLikelihood(stats).hessian(delta)


def local_log_likelihood_ratio(stats: EvolutionStats, delta0: float, h: float) -> float:
    """(n+1)[iota_n(delta0 + h/sqrt(n)) - iota_n(delta0)]."""
    likelihood = FullLikelihood(stats)
    step = h / math.sqrt(stats.n)
    return likelihood.vertices * (likelihood.value(delta0 + step) - likelihood.value(delta0))


# ============================================================================
# Solving
# ============================================================================


def _check_bracket(bracket, tol: float) -> tuple[float, float]:
    lo, hi = (float(b) for b in bracket)
    if not -1.0 < lo < hi or not np.isfinite(hi):
        raise ValidationError(f"bracket must satisfy -1 < lower < upper < inf (got {bracket})")
    if tol <= 0:
        raise ValidationError(f"tol must be positive (got {tol})")
    return lo, hi


def _solve(
    likelihood: _Likelihood,
    bracket,
    tol: float,
    alpha: float,
    mu: float,
    variance_fn=None,
) -> EstimateReport:
    """Maximize a likelihood over the bracket and attach observed information and a CI.

    A positive-to-negative sign change of the score is solved with Brent's method;
    otherwise the likelihood itself is maximized by bounded Brent (golden section
    with parabolic steps) and the boundary status is reported.
    """
    lo, hi = _check_bracket(bracket, tol)
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must be in (0, 1) (got {alpha})")
    tag = likelihood.kind.upper()

    grid = np.linspace(lo, hi, FLAT_GRID)
    grid_scores = np.array([likelihood.score(d) for d in grid])
    if np.max(np.abs(grid_scores)) < FLAT_TOL:
        logger.warning(f"[{tag}] Flat likelihood over [{lo}, {hi}]; no estimate")
        return EstimateReport(
            estimator_kind=likelihood.kind,
            delta_hat=float("nan"),
            bracket=(lo, hi),
            converged=False,
            boundary_hit="flat",
            score_at_estimate=float(grid_scores[0]),
            n=likelihood.n,
            alpha=alpha,
            mu=mu,
        )

    f_lo, f_hi = grid_scores[0], grid_scores[-1]
    boundary = "none"
    if f_lo > 0 > f_hi:
        root, result = brentq(likelihood.score, lo, hi, xtol=tol, full_output=True)
        delta_hat, iterations, converged = float(root), result.iterations, result.converged
    else:
        result = minimize_scalar(
            lambda d: -likelihood.value(d), bounds=(lo, hi), method="bounded",
            options={"xatol": tol},
        )
        candidates = {"lower": lo, "none": float(result.x), "upper": hi}
        boundary = max(candidates, key=lambda b: likelihood.value(candidates[b]))
        delta_hat, iterations = candidates[boundary], int(result.nit)
        converged = boundary == "none" and bool(result.success)

    score = likelihood.score(delta_hat)
    if converged and abs(score) > tol:
        logger.warning(f"[{tag}] |score| = {abs(score):.2e} above tol at delta={delta_hat}")
        converged = False

    report = EstimateReport(
        estimator_kind=likelihood.kind,
        delta_hat=delta_hat,
        bracket=(lo, hi),
        converged=converged,
        boundary_hit=boundary,
        score_at_estimate=score,
        iterations=int(iterations),
        n=likelihood.n,
        alpha=alpha,
        mu=mu,
        tau_hat=3.0 + delta_hat / mu,
    )

    info = -likelihood.hessian(delta_hat)
    report.observed_info = info
    if boundary == "none" and info > 0:
        variance = variance_fn(delta_hat, info) if variance_fn else 1.0 / (likelihood.n * info)
        half = norm.ppf(1.0 - alpha / 2.0) * math.sqrt(variance)
        report.variance = variance
        report.ci = (delta_hat - half, delta_hat + half)
        report.tau_ci = (3.0 + report.ci[0] / mu, 3.0 + report.ci[1] / mu)
    elif boundary == "none":
        logger.warning(f"[{tag}] Observed information {info:.3e} <= 0; no CI")

    logger.info(
        f"[{tag}] delta_hat={delta_hat:.6f} boundary={boundary} converged={converged} "
        f"info={info:.6f} iterations={iterations}"
    )
    return report


def mle(
    stats: EvolutionStats,
    bracket=DEFAULT_BRACKET,
    tol: float = DEFAULT_TOL,
    alpha: float = DEFAULT_ALPHA,
) -> EstimateReport:
    """MLE from the full evolution (histogram plus initial-degree history)."""
    likelihood = FullLikelihood(stats)
    return _solve(likelihood, bracket, tol, alpha, mu=mu_hat(stats))


def infer_fixed_m(snapshot: EvolutionStats) -> int:
    """Recover m from a fixed-m snapshot: the network holds M_n = m n edges."""
    if snapshot.total_edges % snapshot.n != 0:
        raise ValidationError(
            f"Histogram is inconsistent with a constant initial degree: "
            f"M_n = {snapshot.total_edges} is not a multiple of n = {snapshot.n}"
        )
    return snapshot.total_edges // snapshot.n


def mle_fixed_m(
    snapshot: EvolutionStats,
    m: int | None = None,
    bracket=DEFAULT_BRACKET,
    tol: float = DEFAULT_TOL,
    alpha: float = DEFAULT_ALPHA,
) -> EstimateReport:
    """MLE for fixed initial degree m from the final snapshot (sufficient for delta)."""
    inferred = infer_fixed_m(snapshot)
    if m is None:
        m = inferred
    elif m != inferred:
        raise ValidationError(f"m={m} does not match the snapshot's M_n/n = {inferred}")
    if np.any(snapshot.degree_hist[1:m]):
        raise ValidationError(f"Snapshot has vertices of degree below m={m}")
    likelihood = FixedMLikelihood(snapshot, m)
    report = _solve(likelihood, bracket, tol, alpha, mu=float(m))
    report.extras["m"] = m
    return report


def qmle(
    snapshot: EvolutionStats,
    r: InitialDegreeModel,
    bracket=DEFAULT_BRACKET,
    tol: float = DEFAULT_TOL,
    alpha: float = DEFAULT_ALPHA,
    mu_source: str = "known",
) -> EstimateReport:
    """Quasi-MLE from the snapshot and the known initial degree law r.

    With mu_source="plugin" the mean in 1/(2+delta/mu) is replaced by mu_hat.
    """
    if mu_source not in ("known", "plugin"):
        raise ValidationError(f"mu_source must be 'known' or 'plugin' (got {mu_source!r})")
    mu = r.mu if mu_source == "known" else mu_hat(snapshot)
    likelihood = QuasiLikelihood(snapshot, r, mu)

    def sandwich(delta_hat: float, info: float) -> float:
        extra = nu_tilde0(delta_hat, r)
        return (info + extra) / (info**2 * snapshot.n)

    report = _solve(likelihood, bracket, tol, alpha, mu=mu, variance_fn=sandwich)
    report.extras["mu_source"] = mu_source
    return report


def mu_hat(snapshot: EvolutionStats) -> float:
    """Mean initial degree estimate sum_k k N_k(n) / (2n)."""
    ks = np.arange(len(snapshot.degree_hist))
    return float(np.dot(ks, snapshot.degree_hist)) / (2 * snapshot.n)


def loglog_fit(
    snapshot: EvolutionStats,
    k_min: int = 1,
    k_max: int | None = None,
    mu: float | None = None,
) -> EstimateReport:
    """Least-squares slope of log p_k(n) on log k over non-empty cells in [k_min, k_max].

    Reports delta_raw = tau_hat - 3 as `delta_hat` and mu(tau_hat - 3) in extras.
    """
    k_max = snapshot.max_degree if k_max is None else k_max
    if k_min >= k_max:
        raise ValidationError(f"k_min must be below k_max (got {k_min} >= {k_max})")
    hist = np.asarray(snapshot.degree_hist, dtype=float)
    ks = np.arange(len(hist))
    cells = (ks >= max(k_min, 1)) & (ks <= k_max) & (hist > 0)
    if cells.sum() < 3:
        raise ValidationError(f"loglog_fit needs >= 3 non-empty cells, found {int(cells.sum())}")

    log_k = np.log(ks[cells])
    log_p = np.log(hist[cells] / (snapshot.n + 1))
    slope, intercept = np.polyfit(log_k, log_p, deg=1)
    tau_hat = -float(slope)
    mu = mu_hat(snapshot) if mu is None else float(mu)
    delta_raw = tau_hat - 3.0
    logger.info(f"[LogLog] tau_hat={tau_hat:.4f} cells={int(cells.sum())} k=[{k_min}, {k_max}]")
    return EstimateReport(
        estimator_kind="loglog",
        delta_hat=delta_raw,
        bracket=None,
        converged=True,
        n=snapshot.n,
        mu=mu,
        tau_hat=tau_hat,
        extras={
            "delta_raw": delta_raw,
            "delta_scaled": mu * delta_raw,
            "slope": float(slope),
            "intercept": float(intercept),
            "cells": int(cells.sum()),
            "k_min": int(k_min),
            "k_max": int(k_max),
        },
    )


def estimate(
    kind: str,
    stats: EvolutionStats,
    r: InitialDegreeModel | None = None,
    bracket=DEFAULT_BRACKET,
    tol: float = DEFAULT_TOL,
    alpha: float = DEFAULT_ALPHA,
) -> EstimateReport:
    """Dispatch by estimator kind (used by the Monte Carlo harness and the CLI)."""
    if kind == "mle":
        return mle(stats, bracket, tol, alpha)
    if kind == "mle_fixed_m":
        return mle_fixed_m(stats, None, bracket, tol, alpha)
    if kind == "qmle":
        if r is None:
            raise ValidationError("qmle needs the initial degree law r")
        return qmle(stats, r, bracket, tol, alpha)
    if kind == "loglog":
        return loglog_fit(stats)
    raise ValidationError(f"Unknown estimator '{kind}'")
