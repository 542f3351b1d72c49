"""Monte Carlo replication harness: seeded simulate -> estimate pipelines and their summaries."""

import logging
import math
from multiprocessing import Pool
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeRemainingColumn
from scipy.stats import norm

from degree_law import limit_law, nu0, predicted_variance, qmle_variance
from estimators import estimate
from models import (
    EstimateReport,
    EstimatorSummary,
    LimitLaw,
    McConfig,
    McSummary,
    SimConfig,
    ValidationError,
)
from pa_sim import degree_histories, simulate, snapshot_stats

logger = logging.getLogger(__name__)
console = Console(stderr=True)

# estimators that see the whole evolution; the others only get the final snapshot
HISTORY_ESTIMATORS = ("mle",)


# ============================================================================
# Replicates
# ============================================================================


def _run_replicate(task: tuple[McConfig, int]) -> dict[str, Any]:
    """simulate -> estimate for one replicate. Never raises: failures are returned."""
    config, replicate = task
    sim_config = config.replicate_config(replicate)
    outcome: dict[str, Any] = {"replicate": replicate, "reports": {}, "errors": {}}

    try:
        stats = simulate(sim_config)
    except Exception as e:
        outcome["errors"]["simulate"] = f"{type(e).__name__}: {e}"
        return outcome

    snapshot = snapshot_stats(stats)
    model = config.qmle_model or config.sim.model
    for kind in config.estimators:
        source = stats if kind in HISTORY_ESTIMATORS else snapshot
        try:
            outcome["reports"][kind] = estimate(
                kind, source, model, config.bracket, config.tol, config.alpha
            )
        except Exception as e:
            outcome["errors"][kind] = f"{type(e).__name__}: {e}"
    return outcome


def _iter_outcomes(config: McConfig):
    tasks = [(config, r) for r in range(config.replicates)]
    if config.workers == 1:
        for task in tasks:
            yield _run_replicate(task)
        return

    chunksize = max(1, len(tasks) // (config.workers * 8))
    with Pool(processes=config.workers) as pool:
        # imap keeps replicate order whatever the schedule
        yield from pool.imap(_run_replicate, tasks, chunksize=chunksize)


def _collect(config: McConfig, show_progress: bool) -> list[dict[str, Any]]:
    if not show_progress:
        return list(_iter_outcomes(config))

    outcomes = []
    with Progress(
        TextColumn("[cyan]Replicates[/cyan]"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeRemainingColumn(),
        console=console,
    ) as progress:
        task = progress.add_task("Monte Carlo", total=config.replicates)
        for outcome in _iter_outcomes(config):
            outcomes.append(outcome)
            progress.update(task, advance=1)
    return outcomes


# ============================================================================
# Aggregation
# ============================================================================


def estimator_target(kind: str, config: McConfig) -> float:
    """True value each estimator aims at; the raw log-log fit targets delta0/mu."""
    if kind == "loglog":
        return config.delta0 / config.sim.model.mu
    return config.delta0


def _predicted_variance(kind: str, config: McConfig) -> float | None:
    n = config.sim.n
    if kind in ("mle", "mle_fixed_m"):
        return predicted_variance(nu0(config.delta0, config.sim.model), n)
    if kind == "qmle":
        return qmle_variance(config.delta0, config.qmle_model or config.sim.model, n)
    return None


def _histogram(
    values: np.ndarray,
    bins: str | int,
    asymptotic: tuple[float, float] | None,
    bestfit: tuple[float, float] | None,
) -> list[dict[str, float]]:
    """Binned estimates with expected counts under the two normal overlays."""
    if len(values) == 0:
        return []
    counts, edges = np.histogram(values, bins=np.histogram_bin_edges(values, bins=bins))
    lo, hi = edges[:-1], edges[1:]

    def expected(params):
        if params is None or not params[1] > 0:
            return np.full(len(counts), np.nan)
        loc, scale = params
        return len(values) * (norm.cdf(hi, loc, scale) - norm.cdf(lo, loc, scale))

    return [
        {
            "bin_lo": float(a),
            "bin_hi": float(b),
            "count": int(c),
            "normal_asymptotic": float(e_asym),
            "normal_bestfit": float(e_fit),
        }
        for a, b, c, e_asym, e_fit in zip(
            lo, hi, counts, expected(asymptotic), expected(bestfit), strict=True
        )
    ]


def summarize_estimator(
    kind: str, reports: list[EstimateReport], config: McConfig
) -> EstimatorSummary:
    """Sampling distribution of one estimator against its asymptotic prediction."""
    values = np.array([rep.delta_hat for rep in reports], dtype=float)
    target = estimator_target(kind, config)
    count = len(values)

    sample_var = float(np.var(values, ddof=1)) if count > 1 else None
    mean = float(np.mean(values)) if count else None
    bias = mean - target if mean is not None else None
    mse = bias**2 + sample_var if sample_var is not None else None
    std_error = math.sqrt(sample_var / count) if sample_var is not None else None

    pred_var = _predicted_variance(kind, config)
    asymptotic = (target, math.sqrt(pred_var)) if pred_var is not None else None
    bestfit = (mean, math.sqrt(sample_var)) if sample_var is not None else None

    ci_reports = [rep for rep in reports if rep.has_ci]
    return EstimatorSummary(
        estimator=kind,
        count=count,
        minimum=float(values.min()) if count else None,
        median=float(np.median(values)) if count else None,
        mean=mean,
        maximum=float(values.max()) if count else None,
        sample_variance=sample_var,
        predicted_variance=pred_var,
        bias=bias,
        mse=mse,
        mean_std_error=std_error,
        boundary_hits=sum(rep.boundary_hit in ("lower", "upper") for rep in reports),
        ci_emitted=len(ci_reports),
        ci_covered=sum(rep.covers(target) for rep in ci_reports),
        histogram=_histogram(values, config.histogram_bins, asymptotic, bestfit),
        normal_asymptotic=asymptotic,
        normal_bestfit=bestfit,
    )


def _estimate_row(replicate: int, seed: int, kind: str, report: EstimateReport) -> dict[str, Any]:
    ci_lo, ci_hi = report.ci if report.ci is not None else (None, None)
    return {
        "replicate": replicate,
        "seed": seed,
        "estimator": kind,
        "delta_hat": report.delta_hat,
        "ci_lo": ci_lo,
        "ci_hi": ci_hi,
        "converged": report.converged,
        "boundary": report.boundary_hit,
    }


def aggregate(config: McConfig, outcomes: list[dict[str, Any]]) -> McSummary:
    """Fold replicate outcomes, in replicate order, into a summary."""
    outcomes = sorted(outcomes, key=lambda o: o["replicate"])
    per_kind: dict[str, list[EstimateReport]] = {kind: [] for kind in config.estimators}
    failures: list[dict[str, Any]] = []
    rows: list[dict[str, Any]] = []

    for outcome in outcomes:
        replicate = outcome["replicate"]
        for stage, error in outcome["errors"].items():
            failures.append(
                {"replicate": replicate, "seed": config.base_seed, "stage": stage, "error": error}
            )
        for kind, report in outcome["reports"].items():
            rows.append(_estimate_row(replicate, config.base_seed, kind, report))
            if report.boundary_hit == "flat" or not np.isfinite(report.delta_hat):
                failures.append(
                    {
                        "replicate": replicate,
                        "seed": config.base_seed,
                        "stage": kind,
                        "error": "flat likelihood, no estimate",
                    }
                )
                continue
            per_kind[kind].append(report)

    for failure in failures:
        logger.warning(
            f"[MC] replicate {failure['replicate']} (seed {failure['seed']}) "
            f"excluded from {failure['stage']}: {failure['error']}"
        )

    summaries = {kind: summarize_estimator(kind, reps, config) for kind, reps in per_kind.items()}
    estimates = {
        kind: np.array([rep.delta_hat for rep in reps], dtype=float)
        for kind, reps in per_kind.items()
    }
    return McSummary(
        replicates=config.replicates,
        delta0=config.delta0,
        n=config.sim.n,
        estimates=estimates,
        summaries=summaries,
        failures=failures,
        rows=rows,
    )


def summary_table(summary: McSummary) -> pd.DataFrame:
    """One row per estimator: Min, Median, Mean, Max, Samp. Var., Pred. Var."""
    return pd.DataFrame(
        [
            {
                "Estimator": s.estimator,
                "Min": s.minimum,
                "Median": s.median,
                "Mean": s.mean,
                "Max": s.maximum,
                "Samp. Var.": s.sample_variance,
                "Pred. Var.": s.predicted_variance,
            }
            for s in summary.summaries.values()
        ]
    )


# ============================================================================
# Entry points
# ============================================================================


def run_mc(config: McConfig, out_dir: Path | None = None, progress: bool = False) -> McSummary:
    """Run R seeded replicates; replicate r uses the stream (base_seed, r)."""
    logger.info(
        f"[MC] R={config.replicates} n={config.sim.n} delta0={config.delta0} "
        f"estimators={list(config.estimators)} workers={config.workers} seed={config.base_seed}"
    )
    outcomes = _collect(config, progress)
    summary = aggregate(config, outcomes)

    for kind, s in summary.summaries.items():
        logger.info(
            f"[MC] {kind}: count={s.count} mean={s.mean} samp_var={s.sample_variance} "
            f"pred_var={s.predicted_variance} coverage={s.coverage}"
        )
    if summary.failure_count:
        logger.warning(f"[MC] {summary.failure_count} replicate failures recorded")

    if out_dir is not None:
        from io_service import write_mc_outputs

        write_mc_outputs(summary, Path(out_dir))
    return summary


def convergence_probe(
    config: SimConfig, checkpoints, law: LimitLaw | None = None
) -> pd.DataFrame:
    """sup_k |p_k(t) - p_k| of one run at each checkpoint t against the limiting law."""
    if len(checkpoints) == 0:
        raise ValidationError("convergence_probe needs at least one checkpoint")
    law = law or limit_law(config.delta, config.model)
    ts = sorted(int(t) for t in checkpoints)
    histories = degree_histories(config, ts)

    rows = []
    for t, hist in zip(ts, histories, strict=True):
        width = max(len(hist), len(law.p))
        empirical = np.zeros(width)
        empirical[: len(hist)] = hist / (t + 1)
        limit = np.zeros(width)
        limit[: len(law.p)] = law.p
        distance = float(np.max(np.abs(empirical - limit)))
        rows.append({"t": t, "vertices": t + 1, "sup_distance": distance})
        logger.debug(f"[MC] probe t={t} sup_distance={distance:.6f}")
    return pd.DataFrame(rows)
