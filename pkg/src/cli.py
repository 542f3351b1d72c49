"""Command-line surface: simulate, estimate, mc and limit subcommands.

Human-readable panels go to stderr; each subcommand prints its results to stdout
as `key=value` lines for scripts.
"""

import argparse
import configparser
import logging
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from config import Config, version_stamp
from degree_law import limit_law, nu0, nu_tilde0, tail_exponent
from estimators import loglog_fit, mle, mle_fixed_m, qmle
from io_service import load_pmf, load_stats, save_limit_law, save_report, save_stats, write_manifest
from mc_lab import run_mc, summary_table
from models import (
    ESTIMATOR_KINDS,
    InitialDegreeModel,
    McConfig,
    RunManifest,
    SimConfig,
    ValidationError,
    check_delta,
)
from pa_sim import simulate
from settings_manager import parse_bins

logger = logging.getLogger(__name__)
console = Console(stderr=True)
stdout = Console(highlight=False, soft_wrap=True)

ESTIMATOR_FLAGS = {
    "mle": "mle",
    "mle-fixed-m": "mle_fixed_m",
    "qmle": "qmle",
    "loglog": "loglog",
}

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_INTERRUPTED = 130


# ============================================================================
# Helpers
# ============================================================================


@contextmanager
def _flag(name: str):
    """Re-raise validation failures with the flag that caused them."""
    try:
        yield
    except ValueError as e:
        raise ValidationError(f"{name}: {e}") from e


def _now() -> str:
    return datetime.now().isoformat(timespec="seconds")


def _timestamp() -> str:
    return datetime.now().strftime("%Y%m%d_%H%M%S")


def _fmt(value: Any) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _emit(**fields: Any) -> None:
    """One machine-parseable line on stdout."""
    stdout.print(" ".join(f"{k}={_fmt(v)}" for k, v in fields.items()), markup=False)


def _positive_int(name: str, value) -> int:
    with _flag(name):
        if int(value) != float(value) or int(value) < 1:
            raise ValueError(f"must be a positive integer (got {value})")
    return int(value)


def _seed(value) -> int:
    with _flag("--seed"):
        seed = int(value)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer (got {value})")
    return seed


def _replicate(value) -> int:
    with _flag("--replicate"):
        if int(value) != float(value) or int(value) < 0:
            raise ValueError(f"must be a non-negative integer (got {value})")
    return int(value)


def _delta(value) -> float:
    with _flag("--delta"):
        return check_delta(value)


def _bracket(values, config: Config) -> tuple[float, float]:
    lo, hi = values if values else config.estimation.bracket
    with _flag("--bracket"):
        if not -1.0 < float(lo) < float(hi):
            raise ValueError(f"bracket must satisfy -1 < lower < upper (got {lo}, {hi})")
    return float(lo), float(hi)


def _alpha(value, config: Config) -> float:
    alpha = config.estimation.alpha if value is None else float(value)
    with _flag("--alpha"):
        if not 0 < alpha < 1:
            raise ValueError(f"alpha must be in (0, 1) (got {alpha})")
    return alpha


def _tol(value, config: Config) -> float:
    tol = config.estimation.tol if value is None else float(value)
    with _flag("--tol"):
        if tol <= 0:
            raise ValueError(f"tol must be positive (got {tol})")
    return tol


def _model(pmf_file, m, default_m: int | None) -> InitialDegreeModel | None:
    if pmf_file:
        with _flag("--pmf-file"):
            return load_pmf(Path(pmf_file))
    if m is not None:
        with _flag("--m"):
            return InitialDegreeModel.degenerate(m)
    if default_m is not None:
        return InitialDegreeModel.degenerate(default_m)
    return None


def _config_panel(title: str, values: dict[str, Any]) -> None:
    text = Text()
    for key, value in values.items():
        text.append(f"{key}: ", style="bold")
        text.append(f"{value}\n", style="green")
    console.print(Panel(text, title=title, border_style="yellow"))


def _success_panel(message: str, paths: list[Path]) -> None:
    text = Text()
    text.append(f"{message}\n", style="bold green")
    for path in paths:
        text.append("Output: ", style="dim")
        text.append(f"{path}\n", style="cyan")
    console.print(Panel(text, border_style="green"))


def _manifest(subcommand: str, resolved: dict[str, Any], seed: int | None) -> RunManifest:
    return RunManifest(
        subcommand=subcommand,
        config=resolved,
        seed=seed,
        version=version_stamp(),
        started_at=_now(),
    )


def _finish(manifest: RunManifest, out_dir: Path, outputs: list[Path], filename: str) -> Path:
    manifest.finished_at = _now()
    manifest.outputs = [str(p) for p in outputs]
    return write_manifest(manifest, out_dir, filename)


# ============================================================================
# simulate
# ============================================================================


def cmd_simulate(args: argparse.Namespace, config: Config) -> int:
    """Grow one network and write its statistics."""
    n = _positive_int("--n", args.n if args.n is not None else config.simulation.n)
    delta = _delta(args.delta if args.delta is not None else config.simulation.delta)
    seed = _seed(args.seed if args.seed is not None else config.simulation.seed)
    replicate = _replicate(args.replicate)
    model = _model(args.pmf_file, args.m, config.simulation.m)
    sim_config = SimConfig(
        n=n,
        delta=delta,
        initial_degrees=model,
        seed=seed,
        replicate=replicate,
        record_history=args.record_history,
    )

    out_dir = Path(args.out) if args.out else config.output.out_dir / f"sim_{_timestamp()}"
    resolved = {**sim_config.describe(), "snapshot": args.snapshot, "out": str(out_dir)}
    manifest = _manifest("simulate", resolved, seed)
    _config_panel("Simulation", {"n": n, "delta": delta, "mu": model.mu, "seed": seed})

    stats = simulate(sim_config)
    outputs = save_stats(stats, out_dir, snapshot=args.snapshot)
    _finish(manifest, out_dir, outputs, "manifest.json")

    _success_panel(f"Simulated PA_{n} with M_n = {stats.total_edges} edges", outputs)
    _emit(
        out=out_dir,
        n=stats.n,
        total_edges=stats.total_edges,
        max_degree=stats.max_degree,
        snapshot=args.snapshot,
    )
    return EXIT_OK


# ============================================================================
# estimate
# ============================================================================


def cmd_estimate(args: argparse.Namespace, config: Config) -> int:
    """Estimate delta from a saved run or histogram."""
    kind = ESTIMATOR_FLAGS[args.estimator]
    with _flag("--input"):
        stats = load_stats(Path(args.input))
    bracket = _bracket(args.bracket, config)
    tol = _tol(args.tol, config)
    alpha = _alpha(args.alpha, config)

    resolved: dict[str, Any] = {
        "input": str(args.input),
        "estimator": kind,
        "bracket": list(bracket),
        "tol": tol,
        "alpha": alpha,
    }

    with _flag("--estimator"):
        if kind == "mle":
            report = mle(stats, bracket, tol, alpha)
        elif kind == "mle_fixed_m":
            report = mle_fixed_m(stats, args.m, bracket, tol, alpha)
        elif kind == "qmle":
            model = _model(args.pmf_file, args.m, None)
            if model is None:
                raise ValidationError(
                    "--pmf-file: qmle needs the initial degree law (give --pmf-file or --m)"
                )
            resolved.update({"model": model.describe(), "mu_source": args.mu_source})
            report = qmle(stats, model, bracket, tol, alpha, mu_source=args.mu_source)
        else:
            resolved.update({"k_min": args.k_min, "k_max": args.k_max})
            report = loglog_fit(stats, k_min=args.k_min, k_max=args.k_max)

    input_path = Path(args.input)
    out_dir = input_path if input_path.is_dir() else input_path.parent
    report_path = Path(args.out) if args.out else out_dir / f"estimate_{kind}.json"
    manifest = _manifest("estimate", resolved, stats.seed)
    save_report(report, report_path, config=resolved)
    _finish(manifest, report_path.parent, [report_path], f"{report_path.stem}.manifest.json")

    ci_text = f"[{report.ci[0]:.6f}, {report.ci[1]:.6f}]" if report.ci else "n/a"
    _config_panel(
        f"Estimate ({kind})",
        {
            "delta_hat": f"{report.delta_hat:.6f}",
            f"{100 * (1 - alpha):g}% CI": ci_text,
            "boundary": report.boundary_hit,
            "converged": report.converged,
        },
    )
    ci_lo, ci_hi = report.ci if report.ci else (None, None)
    _emit(
        estimator=kind,
        delta_hat=report.delta_hat,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        converged=report.converged,
        boundary=report.boundary_hit,
        tau_hat=report.tau_hat,
    )
    return EXIT_OK


# ============================================================================
# mc
# ============================================================================


def _read_study(path: str | None) -> tuple[dict[str, str], Path | None]:
    if not path:
        return {}, None
    study_path = Path(path)
    parser = configparser.ConfigParser()
    with _flag("--config"):
        if not study_path.exists():
            raise ValidationError(f"study config not found: {study_path}")
        parser.read(study_path)
        if not parser.has_section("mc"):
            raise ValidationError(f"{study_path} has no [mc] section")
    return dict(parser["mc"]), study_path.parent


def cmd_mc(args: argparse.Namespace, config: Config) -> int:
    """Run a Monte Carlo study; flags override the study file, which overrides settings.ini."""
    study, study_dir = _read_study(args.config)
    # a model flag replaces whichever model key the study file set
    if args.m is not None or args.pmf_file is not None:
        study.pop("m", None)
        study.pop("pmf_file", None)

    def pick(key: str, default):
        value = getattr(args, key)
        if value is not None:
            return value
        return study.get(key, default)

    n = _positive_int("--n", pick("n", config.simulation.n))
    delta = _delta(pick("delta", config.simulation.delta))
    seed = _seed(pick("seed", config.simulation.seed))
    replicates = _positive_int("--replicates", pick("replicates", config.monte_carlo.replicates))
    workers = _positive_int("--workers", pick("workers", config.monte_carlo.workers))
    with _flag("--bins"):
        bins = parse_bins(pick("bins", config.monte_carlo.histogram_bins))
    alpha = _alpha(pick("alpha", None), config)

    pmf_file = pick("pmf_file", None)
    if pmf_file and args.pmf_file is None and study_dir is not None:
        candidate = Path(pmf_file)
        if not candidate.is_absolute() and not candidate.exists():
            pmf_file = str(study_dir / candidate)
    m = pick("m", None)
    if m is not None:
        m = _positive_int("--m", m)
    model = _model(pmf_file, m, config.simulation.m)

    with _flag("--estimators"):
        estimators = tuple(
            e.strip().replace("-", "_") for e in str(pick("estimators", "mle")).split(",") if e.strip()
        )
        unknown = [e for e in estimators if e not in ESTIMATOR_KINDS]
        if unknown:
            raise ValidationError(f"unknown estimator(s) {unknown}")
        mc_config = McConfig(
            replicates=replicates,
            sim=SimConfig(n=n, delta=delta, initial_degrees=model, seed=seed),
            estimators=estimators,
            base_seed=seed,
            workers=workers,
            histogram_bins=bins,
            alpha=alpha,
            bracket=config.estimation.bracket,
            tol=config.estimation.tol,
        )

    out_value = pick("out", None)
    out_dir = Path(out_value) if out_value else config.output.out_dir / f"mc_{_timestamp()}"
    resolved = {
        "config_file": args.config,
        "n": n,
        "delta": delta,
        "model": model.describe(),
        "replicates": replicates,
        "estimators": list(estimators),
        "seed": seed,
        "workers": workers,
        "bins": bins,
        "alpha": alpha,
        "bracket": list(config.estimation.bracket),
        "tol": config.estimation.tol,
        "out": str(out_dir),
    }
    manifest = _manifest("mc", resolved, seed)
    _config_panel(
        "Monte Carlo",
        {"R": replicates, "n": n, "delta0": delta, "estimators": ", ".join(estimators), "workers": workers},
    )

    summary = run_mc(mc_config, out_dir=out_dir, progress=not args.quiet)
    outputs = [out_dir / "estimates.csv", out_dir / "summary.json", out_dir / "histogram.csv"]
    _finish(manifest, out_dir, outputs, "manifest.json")

    table = Table(title=f"Summary of {replicates} replicates")
    frame = summary_table(summary)
    for column in frame.columns:
        table.add_column(column, justify="right")
    for row in frame.itertuples(index=False):
        table.add_row(*(v if isinstance(v, str) else _fmt(v) for v in row))
    console.print(table)
    if summary.failure_count:
        console.print(f"[yellow]{summary.failure_count} replicate failures recorded[/yellow]")
    _success_panel("Monte Carlo study complete", outputs)

    for kind, s in summary.summaries.items():
        _emit(
            estimator=kind,
            count=s.count,
            mean=s.mean,
            median=s.median,
            samp_var=s.sample_variance,
            pred_var=s.predicted_variance,
            mse=s.mse,
            coverage=s.coverage,
        )
    _emit(failures=summary.failure_count, out=out_dir)
    return EXIT_OK


# ============================================================================
# limit
# ============================================================================


def cmd_limit(args: argparse.Namespace, config: Config) -> int:
    """Tabulate the limiting degree law and the variance constants."""
    delta = _delta(args.delta if args.delta is not None else config.simulation.delta)
    model = _model(args.pmf_file, args.m, config.simulation.m)
    tail_tol = config.limits.tail_tol if args.tail_tol is None else args.tail_tol
    with _flag("--tail-tol"):
        law = limit_law(delta, model, tail_tol)
    with _flag("--delta"):
        nu = nu0(delta, model, tail_tol)
        nu_tilde = nu_tilde0(delta, model, tail_tol)

    table = Table(title=f"Limiting degree law (delta={delta:g}, mu={model.mu:g})")
    for column in ("k", "p_k", "p_(>k)", "q_k"):
        table.add_column(column, justify="right")
    for k in range(1, min(args.rows, law.k_trunc) + 1):
        table.add_row(str(k), f"{law.p[k]:.6f}", f"{law.p_tail[k]:.6f}", f"{law.q[k]:.6f}")
    console.print(table)
    for note in law.warnings:
        console.print(f"[yellow]Warning: {note}[/yellow]")

    outputs = []
    if args.out:
        out_path = Path(args.out)
        outputs.append(save_limit_law(law, out_path))
        resolved = {
            "delta": delta,
            "model": model.describe(),
            "tail_tol": tail_tol,
            "out": str(out_path),
        }
        _finish(
            _manifest("limit", resolved, None),
            out_path.parent,
            outputs,
            f"{out_path.stem}.manifest.json",
        )
        _success_panel("Limiting law written", outputs)

    _emit(
        delta=delta,
        mu=model.mu,
        theta=law.theta,
        tau=tail_exponent(delta, model),
        nu0=nu,
        nu_tilde0=nu_tilde,
        p_1=law.p[1],
        k_trunc=law.k_trunc,
        trunc_mass=law.trunc_mass,
    )
    return EXIT_OK


# ============================================================================
# Parser and entry point
# ============================================================================


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--m", type=int, help="fixed initial degree m (degenerate law)")
    group.add_argument("--pmf-file", help="CSV with columns k,r_k giving the initial degree law")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pa_lab",
        description="Simulate affine preferential attachment networks and estimate delta.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    sim = subparsers.add_parser("simulate", help="grow one network PA_n(delta)")
    sim.add_argument("--n", type=int, help="number of growth steps (n+1 vertices)")
    sim.add_argument("--delta", type=float, help="affine parameter, delta > -1")
    _add_model_flags(sim)
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--replicate", type=int, default=0, help="replicate index of the stream")
    sim.add_argument(
        "--record-history", action="store_true", help="keep (t, i, degree) of every draw"
    )
    sim.add_argument(
        "--snapshot", action="store_true", help="write only the final histogram and edge count"
    )
    sim.add_argument("--out", help="output directory")
    sim.set_defaults(handler=cmd_simulate)

    est = subparsers.add_parser("estimate", help="estimate delta from a run or histogram")
    est.add_argument("--input", required=True, help="run directory, stats.json or histogram CSV")
    est.add_argument("--estimator", choices=sorted(ESTIMATOR_FLAGS), default="mle")
    _add_model_flags(est)
    est.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
    est.add_argument("--tol", type=float, help="root-finding tolerance")
    est.add_argument("--alpha", type=float, help="CI level is 1 - alpha")
    est.add_argument("--k-min", type=int, default=1, help="loglog: smallest degree fitted")
    est.add_argument("--k-max", type=int, help="loglog: largest degree fitted")
    est.add_argument(
        "--mu-source",
        choices=["known", "plugin"],
        default="known",
        help="qmle: mean initial degree from the law or estimated from the snapshot",
    )
    est.add_argument("--out", help="report path (default: <input>/estimate_<kind>.json)")
    est.set_defaults(handler=cmd_estimate)

    mc = subparsers.add_parser("mc", help="run a Monte Carlo study")
    mc.add_argument("--config", help="INI study file with an [mc] section")
    mc.add_argument("--n", type=int)
    mc.add_argument("--delta", type=float)
    _add_model_flags(mc)
    mc.add_argument("--replicates", type=int)
    mc.add_argument("--estimators", help="comma-separated subset of mle,mle-fixed-m,qmle,loglog")
    mc.add_argument("--seed", type=int)
    mc.add_argument("--workers", type=int, help="worker processes (default: PA_WORKERS)")
    mc.add_argument("--bins", help="histogram bins: 'fd' or a count")
    mc.add_argument("--alpha", type=float)
    mc.add_argument("--out", help="output directory")
    mc.add_argument("--quiet", action="store_true", help="no progress bar")
    mc.set_defaults(handler=cmd_mc)

    lim = subparsers.add_parser("limit", help="tabulate the limiting degree law")
    lim.add_argument("--delta", type=float)
    _add_model_flags(lim)
    lim.add_argument("--tail-tol", type=float)
    lim.add_argument("--rows", type=int, default=10, help="rows shown on the console")
    lim.add_argument("--out", help="CSV path for the full table")
    lim.set_defaults(handler=cmd_limit)

    return parser


def main(argv: list[str] | None = None, config: Config | None = None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_VALIDATION

    try:
        config = config or Config.from_env()
        logger.info(f"[CLI] {args.command} {argv}")
        return args.handler(args, config)

    except KeyboardInterrupt:
        console.print("\n[bold red] Interrupted by user[/bold red]")
        logger.warning("Interrupted by user")
        return EXIT_INTERRUPTED

    except ValueError as e:
        console.print(Panel(str(e), title="Invalid input", border_style="red"))
        logger.error(f"[CLI] Validation error: {e}", exc_info=True)
        return EXIT_VALIDATION

    except Exception as e:
        console.print(Panel(f"{type(e).__name__}: {e}", title="Fatal error", border_style="red"))
        logger.error(f"[CLI] Fatal error: {e}", exc_info=True)
        return EXIT_RUNTIME

