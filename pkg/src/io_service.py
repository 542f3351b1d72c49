"""Reading and writing of evolution statistics, reports, laws and study outputs."""

import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from config import version_stamp
from degree_law import limit_law_table
from models import (
    EstimateReport,
    EvolutionStats,
    InitialDegreeModel,
    LimitLaw,
    McSummary,
    RunManifest,
    ValidationError,
)
from pa_sim import build_stats, snapshot_from_histogram

logger = logging.getLogger(__name__)

STATS_FORMAT = "pa-evolution-stats"
REPORT_FORMAT = "pa-estimate-report"
FORMAT_VERSION = 1

STATS_FILE = "stats.json"
HISTOGRAM_FILE = "degree_histogram.csv"
MANIFEST_FILE = "manifest.json"
ESTIMATES_FILE = "estimates.csv"
SUMMARY_FILE = "summary.json"
MC_HISTOGRAM_FILE = "histogram.csv"

ESTIMATE_COLUMNS = [
    "replicate",
    "seed",
    "estimator",
    "delta_hat",
    "ci_lo",
    "ci_hi",
    "converged",
    "boundary",
]
HISTOGRAM_COLUMNS = [
    "estimator",
    "bin_lo",
    "bin_hi",
    "count",
    "normal_asymptotic",
    "normal_bestfit",
]

# pmf files may be rounded when written by hand
PMF_FILE_TOL = 1e-6


def _jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.integer | np.bool_):
        return value.item()
    if isinstance(value, float | np.floating):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def _write_json(data: dict[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(_jsonable(data), f, indent=2, allow_nan=False)
        f.write("\n")
    return path


def _read_json(path: Path) -> dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path} is not valid JSON: {e}") from e


# ============================================================================
# Initial degree laws
# ============================================================================


def load_pmf(path: Path) -> InitialDegreeModel:
    """Initial degree law from a CSV file with columns k, r_k."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"pmf file not found: {path}")
    df = pd.read_csv(path)
    missing = [col for col in ("k", "r_k") if col not in df.columns]
    if missing:
        raise ValidationError(f"Missing column(s) {missing} in pmf file {path}")
    if df["k"].duplicated().any():
        raise ValidationError(f"Duplicate k values in pmf file {path}")

    pmf = {int(k): float(r) for k, r in zip(df["k"], df["r_k"], strict=True)}
    total = sum(pmf.values())
    if abs(total - 1.0) > PMF_FILE_TOL:
        raise ValidationError(f"pmf in {path} sums to {total!r}, expected 1")
    logger.debug(f"Loaded pmf with {len(pmf)} support points from {path}")
    return InitialDegreeModel.from_pmf(pmf, normalize=True)


def save_pmf(model: InitialDegreeModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"k": model.support, "r_k": model.probs}).to_csv(
        path, index=False, float_format="%.17g"
    )
    return path


def _model_from_metadata(data: dict[str, Any] | None) -> InitialDegreeModel | None:
    if not data:
        return None
    return InitialDegreeModel(
        {int(k): float(v) for k, v in data["pmf"].items()},
        truncated=bool(data.get("truncated", False)),
        dropped_mass=float(data.get("dropped_mass", 0.0)),
    )


# ============================================================================
# Evolution statistics
# ============================================================================


def save_stats(stats: EvolutionStats, out_dir: Path, snapshot: bool = False) -> list[Path]:
    """Write stats.json and degree_histogram.csv; `snapshot` drops the edge-count history."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    keep_history = not (snapshot or stats.is_snapshot)

    metadata = stats.metadata()
    metadata["snapshot"] = not keep_history
    data = {
        "format": STATS_FORMAT,
        "version": FORMAT_VERSION,
        "app_version": version_stamp(),
        "metadata": metadata,
        "n": stats.n,
        "total_edges": stats.total_edges,
        "degree_hist": stats.degree_hist,
        "m_seq": stats.m_seq if keep_history else None,
        "history": stats.history if keep_history else None,
    }
    json_path = _write_json(data, out_dir / STATS_FILE)

    ks = np.flatnonzero(stats.degree_hist)
    csv_path = out_dir / HISTOGRAM_FILE
    pd.DataFrame({"k": ks, "N_k": np.asarray(stats.degree_hist)[ks]}).to_csv(csv_path, index=False)

    logger.info(f"Stats written to {out_dir} (snapshot={not keep_history})")
    return [json_path, csv_path]


def _stats_from_json(path: Path) -> EvolutionStats:
    data = _read_json(path)
    if data.get("format") != STATS_FORMAT:
        raise ValidationError(f"{path} is not a {STATS_FORMAT} file")
    if data.get("version") != FORMAT_VERSION:
        raise ValidationError(f"Unsupported stats format version {data.get('version')} in {path}")

    meta = data.get("metadata") or {}
    fields = {
        "delta": meta.get("delta"),
        "seed": meta.get("seed"),
        "replicate": meta.get("replicate"),
        "model": _model_from_metadata(meta.get("model")),
    }
    degree_hist = np.asarray(data["degree_hist"], dtype=np.int64)

    if data.get("m_seq") is None:
        stats = snapshot_from_histogram(degree_hist, n=int(data["n"]), **fields)
    else:
        # per-vertex order is irrelevant to every statistic
        degrees = np.repeat(np.arange(len(degree_hist)), degree_hist)
        history = data.get("history")
        stats = build_stats(
            degrees,
            data["m_seq"],
            history=np.asarray(history, dtype=np.int64).reshape(-1, 3) if history else None,
            **fields,
        )

    if stats.total_edges != int(data["total_edges"]):
        raise ValidationError(
            f"Histogram in {path} implies {stats.total_edges} edges, file says {data['total_edges']}"
        )
    return stats


def _stats_from_csv(path: Path) -> EvolutionStats:
    df = pd.read_csv(path)
    if not {"k", "N_k"} <= set(df.columns):
        raise ValidationError(f"Histogram file {path} needs columns k, N_k")
    if (df["k"] < 0).any() or (df["N_k"] < 0).any():
        raise ValidationError(f"Negative degree or count in {path}")
    hist = np.zeros(int(df["k"].max()) + 1, dtype=np.int64)
    np.add.at(hist, df["k"].to_numpy(dtype=np.int64), df["N_k"].to_numpy(dtype=np.int64))
    degree_sum = int(np.dot(np.arange(len(hist)), hist))
    if degree_sum % 2:
        raise ValidationError(f"Histogram in {path} has an odd degree sum {degree_sum}")
    return snapshot_from_histogram(hist)


def load_stats(path: Path) -> EvolutionStats:
    """Stats from a run directory, a stats.json file or a bare degree histogram CSV."""
    path = Path(path)
    if path.is_dir():
        if (path / STATS_FILE).exists():
            path = path / STATS_FILE
        elif (path / HISTOGRAM_FILE).exists():
            path = path / HISTOGRAM_FILE
        else:
            raise ValidationError(f"No {STATS_FILE} or {HISTOGRAM_FILE} in {path}")
    if not path.exists():
        raise ValidationError(f"Input not found: {path}")

    stats = _stats_from_csv(path) if path.suffix == ".csv" else _stats_from_json(path)
    logger.info(f"Loaded stats from {path}: n={stats.n} snapshot={stats.is_snapshot}")
    return stats


# ============================================================================
# Reports, laws and manifests
# ============================================================================


def save_report(
    report: EstimateReport, path: Path, config: dict[str, Any] | None = None
) -> Path:
    data = {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "app_version": version_stamp(),
        "config": config or {},
        "report": report.to_dict(),
    }
    return _write_json(data, Path(path))


def load_report(path: Path) -> EstimateReport:
    data = _read_json(Path(path))
    if data.get("format") != REPORT_FORMAT:
        raise ValidationError(f"{path} is not a {REPORT_FORMAT} file")
    fields = dict(data["report"])
    for key in ("bracket", "ci", "tau_ci"):
        if fields.get(key) is not None:
            fields[key] = tuple(fields[key])
    if fields.get("delta_hat") is None:
        fields["delta_hat"] = float("nan")
    return EstimateReport(**fields)


def save_limit_law(law: LimitLaw, path: Path) -> Path:
    """Columns k, p_k, p_gt_k, q_k at full precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    limit_law_table(law).to_csv(path, index=False, float_format="%.17g")
    return path


def write_manifest(manifest: RunManifest, out_dir: Path, filename: str = MANIFEST_FILE) -> Path:
    """Resolved config, seed, version, timestamps and outputs of one run."""
    return _write_json(asdict(manifest), Path(out_dir) / filename)


def write_mc_outputs(summary: McSummary, out_dir: Path) -> list[Path]:
    """estimates.csv, summary.json and histogram.csv of a Monte Carlo study."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    estimates_path = out_dir / ESTIMATES_FILE
    pd.DataFrame(summary.rows, columns=ESTIMATE_COLUMNS).to_csv(
        estimates_path, index=False, float_format="%.17g"
    )

    histogram_rows = [
        {"estimator": kind, **row}
        for kind, s in summary.summaries.items()
        for row in s.histogram
    ]
    histogram_path = out_dir / MC_HISTOGRAM_FILE
    pd.DataFrame(histogram_rows, columns=HISTOGRAM_COLUMNS).to_csv(
        histogram_path, index=False, float_format="%.17g"
    )

    data = summary.to_dict()
    data["app_version"] = version_stamp()
    summary_path = _write_json(data, out_dir / SUMMARY_FILE)

    logger.info(f"[MC] Outputs written to {out_dir}")
    return [estimates_path, summary_path, histogram_path]
