"""Limiting degree law and asymptotic variance constants.

All functions are pure. Degree-indexed arrays start at k = 0 with p_0 = 0.
"""

import logging
import math
import warnings

import numpy as np
import pandas as pd
from scipy.special import gammaln

from models import (
    InitialDegreeModel,
    LimitLaw,
    TruncationError,
    ValidationError,
    check_delta,
)

logger = logging.getLogger(__name__)

DEFAULT_TAIL_TOL = 1e-12
# covers p_(>K) = 30/((K+1)(K+2)) < 1e-12 for m = 5, delta = 0 (K near 5.5e6)
DEFAULT_MAX_TERMS = 8_000_000


class TailTruncationWarning(UserWarning):
    """A series or an initial degree law was cut with non-negligible mass left."""


def tail_exponent(delta: float, r: InitialDegreeModel) -> float:
    """Power-law exponent 3 + delta/mu of p_k (initial-degree tail assumed lighter)."""
    return 3.0 + check_delta(delta) / r.mu


def _check_tail_tol(tail_tol: float) -> None:
    if not 0 < tail_tol < 1:
        raise ValidationError(f"tail_tol must be in (0, 1) (got {tail_tol})")


def _log_p_beyond(k, k0: int, log_p0: float, delta: float, theta: float):
    """log p_k for k >= k0 past the support of r, where p_k/p_{k-1} = (k-1+d)/(k+d+theta)."""
    return (
        log_p0
        + gammaln(k + delta)
        - gammaln(k0 + delta)
        - gammaln(k + 1 + delta + theta)
        + gammaln(k0 + 1 + delta + theta)
    )


def _find_cutoff(k0: int, p0: float, delta: float, theta: float, tail_tol: float, cap: int) -> int:
    """Smallest K >= k0 with p_{>K} = (K+delta) p_K / theta < tail_tol, at most cap."""

    def tail(k: int) -> float:
        return math.exp(math.log(k + delta) + _log_p_beyond(k, k0, math.log(p0), delta, theta)) / theta

    if tail(k0) < tail_tol:
        return k0
    lo, hi = k0, k0 + 1
    while tail(hi) >= tail_tol:
        if hi >= cap:
            return cap
        lo, hi = hi, min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail(mid) < tail_tol:
            hi = mid
        else:
            lo = mid
    return hi


def _assemble(
    delta: float,
    theta: float,
    mu: float,
    p: np.ndarray,
    r_tail: np.ndarray,
    notes: list[str],
) -> LimitLaw:
    """Fill p_{>k} (by the tail identity) and q_k around a computed p."""
    ks = np.arange(len(p), dtype=float)
    k_trunc = len(p) - 1
    p_tail = (ks + delta) * p / theta + r_tail
    p_tail[0] = 1.0
    q = (ks + delta) * p / (2 * mu + delta)
    q[0] = 0.0
    # Gamma-ratio telescoping: sum_{k>K} (k+delta) p_k = (K+1+delta)(K+delta) p_K / (theta-1)
    a_k = (k_trunc + delta) * p[k_trunc]
    q_trunc = (k_trunc + 1 + delta) * a_k / ((theta - 1.0) * (2 * mu + delta))
    return LimitLaw(
        delta=delta,
        theta=theta,
        mu=mu,
        p=p,
        p_tail=p_tail,
        q=q,
        trunc_mass=float(p_tail[k_trunc]),
        q_trunc=float(q_trunc),
        warnings=notes,
    )


def limit_law(
    delta: float,
    r: InitialDegreeModel,
    tail_tol: float = DEFAULT_TAIL_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> LimitLaw:
    """Limiting degree law p_k by forward recursion from p_0 = 0.

    The recursion is stepped explicitly over the support of r; past it p_k is a
    running product of (k-1+delta)/(k+delta+theta). The cutoff K_trunc is the
    smallest K >= max support with p_{>K} < tail_tol, capped at max_terms.
    """
    delta = check_delta(delta)
    _check_tail_tol(tail_tol)
    mu = r.mu
    theta = 2.0 + delta / mu
    s_max = r.support_max
    r_dense = r.dense()

    p_head = np.zeros(s_max + 1)
    for k in range(1, s_max + 1):
        p_head[k] = ((k - 1 + delta) * p_head[k - 1] + theta * r_dense[k]) / (k + delta + theta)

    cap = max(max_terms, s_max)
    k_guess = _find_cutoff(s_max, p_head[s_max], delta, theta, tail_tol, cap)
    notes: list[str] = []

    # the log-gamma cutoff is approximate at large K; cut on the stored tail
    k_build = min(cap, k_guess + k_guess // 100 + 16)
    ks = np.arange(s_max + 1, k_build + 1, dtype=float)
    ratios = (ks - 1 + delta) / (ks + delta + theta)
    p = np.concatenate([p_head, p_head[s_max] * np.cumprod(ratios)])
    ks_all = np.arange(k_build + 1, dtype=float)
    p_tail_all = (ks_all + delta) * p / theta + r.tails(k_build)
    below = np.flatnonzero(p_tail_all[s_max:] < tail_tol)
    k_trunc = s_max + int(below[0]) if below.size else k_build
    p = p[: k_trunc + 1]

    law = _assemble(delta, theta, mu, p, r.tails(k_trunc), notes)
    if law.trunc_mass >= tail_tol:
        msg = (
            f"p_(>K) = {law.trunc_mass:.3e} at the term cap K = {k_trunc}; "
            f"tail_tol {tail_tol:.1e} not reached"
        )
        notes.append(msg)
        logger.warning(f"[Law] {msg}")

    logger.debug(
        f"[Law] delta={delta} mu={mu:.4f} theta={theta:.4f} K={k_trunc} "
        f"tail={law.trunc_mass:.3e}"
    )
    return law


def fixed_m_law(
    delta: float,
    m: int,
    k_max: int | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> LimitLaw:
    """Closed-form law for a degenerate initial degree m, evaluated in log-gamma space."""
    delta = check_delta(delta)
    if int(m) != m or m < 1:
        raise ValidationError(f"m must be a positive integer (got {m})")
    m = int(m)
    theta = 2.0 + delta / m
    log_pm = math.log(theta) - math.log(m + delta + theta)

    if k_max is None:
        k_max = _find_cutoff(m, math.exp(log_pm), delta, theta, tail_tol, DEFAULT_MAX_TERMS)
    k_max = max(int(k_max), m)

    ks = np.arange(m, k_max + 1, dtype=float)
    log_p = (
        math.log(theta)
        + gammaln(ks + delta)
        + gammaln(m + delta + theta)
        - gammaln(m + delta)
        - gammaln(ks + 1 + delta + theta)
    )
    p = np.zeros(k_max + 1)
    p[m:] = np.exp(log_p)

    r_tail = np.zeros(k_max + 1)
    r_tail[:m] = 1.0
    return _assemble(delta, theta, float(m), p, r_tail, [])


def limit_law_table(law: LimitLaw) -> pd.DataFrame:
    """Columns k, p_k, p_gt_k, q_k for k = 1..K_trunc."""
    return pd.DataFrame(
        {
            "k": law.ks[1:],
            "p_k": law.p[1:],
            "p_gt_k": law.p_tail[1:],
            "q_k": law.q[1:],
        }
    )


def limit_score_with_error(
    delta: float, delta0_law: LimitLaw, r: InitialDegreeModel
) -> tuple[float, float]:
    """Limit score iota'(delta) and a bound on its truncation error."""
    delta = check_delta(delta)
    law = delta0_law
    mu = r.mu
    ks = law.ks[1:].astype(float)
    # p0_{>k} - r_{>k} = mu q0_k by the tail identity
    head = math.fsum(mu * law.q[1:] / (ks + delta))

    # sum_{k>K} mu q0_k/(k+delta0) = mu p0_{>K}/(2mu+delta0) exactly; the factor
    # (k+delta0)/(k+delta) moves monotonically from its value at K+1 towards 1
    base = mu * law.trunc_mass / (2 * mu + law.delta)
    ratio = (law.k_trunc + 1 + law.delta) / (law.k_trunc + 1 + delta)
    tail = 0.5 * base * (1.0 + ratio)
    error = 0.5 * base * abs(1.0 - ratio)
    return head + tail - 1.0 / (2.0 + delta / mu), error


def limit_score(delta: float, delta0_law: LimitLaw, r: InitialDegreeModel) -> float:
    """Limit of the normalized score: sum_k (p0_{>k} - r_{>k})/(k+delta) - 1/(2+delta/mu)."""
    return limit_score_with_error(delta, delta0_law, r)[0]


def nu0(delta0: float, r: InitialDegreeModel, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """Inverse asymptotic variance of sqrt(n)(delta_hat - delta0) for the MLE."""
    delta0 = check_delta(delta0, "delta0")
    law = limit_law(delta0, r, tail_tol)
    mu = r.mu
    ks = law.ks[1:].astype(float)
    head = math.fsum(mu * law.q[1:] / (ks + delta0) ** 2)
    # remaining terms lie in [0, mu q_trunc / (K+1+delta0)^2]; take the midpoint
    tail = 0.5 * mu * law.q_trunc / (law.k_trunc + 1 + delta0) ** 2
    value = head + tail - mu / (2 * mu + delta0) ** 2
    if value <= 0:
        raise TruncationError(
            f"nu0 = {value:.3e} <= 0 at delta0={delta0}; truncation too aggressive"
        )
    return value


def predicted_variance(nu: float, n: int) -> float:
    """Asymptotic variance 1/(n nu0) of the MLE at sample size n."""
    return 1.0 / (n * nu)


def _g_values(delta0: float, r: InitialDegreeModel) -> np.ndarray:
    """g(m) = sum_k (1{m>k} - r_{>k})/(k+delta0) + (m-mu)/(delta0+2mu) on the support."""
    mu = r.mu
    s_max = r.support_max
    ks = np.arange(1, s_max, dtype=float)
    weights = 1.0 / (ks + delta0)
    centre = float(np.dot(r.tails(s_max)[1:s_max], weights))
    harmonic = np.concatenate([[0.0], np.cumsum(weights)])
    support = r.support
    return harmonic[support - 1] - centre + (support - mu) / (delta0 + 2 * mu)


def nu_tilde0(delta0: float, r: InitialDegreeModel, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """Extra score variance of the quasi-likelihood from not observing (m_t).

    The k-series in g(m) is finite for finite support, so the moments are exact.
    """
    delta0 = check_delta(delta0, "delta0")
    _check_tail_tol(tail_tol)
    if r.truncated and r.dropped_mass > tail_tol:
        msg = (
            f"initial degree law was truncated with dropped mass {r.dropped_mass:.3e}; "
            f"nu_tilde0 refers to the truncated law"
        )
        logger.warning(f"[Law] {msg}")
        warnings.warn(msg, TailTruncationWarning, stacklevel=2)

    if r.is_degenerate:
        return 0.0

    mu = r.mu
    probs = r.probs
    support = r.support.astype(float)
    g = _g_values(delta0, r)
    var_g = float(np.dot(probs, g**2) - np.dot(probs, g) ** 2)
    e_gm = float(np.dot(probs, g * support))
    scale = delta0 + 2 * mu
    value = var_g + 8 * mu**2 * r.variance / scale**4 - 4 * mu * e_gm / scale**2
    return max(value, 0.0)


def qmle_variance(delta0: float, r: InitialDegreeModel, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """Asymptotic variance (nu0 + nu_tilde0)/(nu0^2 n) of the QMLE."""
    nu = nu0(delta0, r, tail_tol)
    return (nu + nu_tilde0(delta0, r, tail_tol)) / (nu**2 * n)
