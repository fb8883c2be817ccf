"""Condition classification, grouped statistics and effect-size reports.

Classifies sequence windows as straight or curved driving, buckets them by
speed, and compares interaction against baseline metrics per metric,
curvature condition and speed bucket using Cohen's d. Reports are exported
as CSV or JSON together with effect-size summaries and per-bucket plot data.
"""

import csv
import json
import logging
import math
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np

from exceptions import MissingInputError, TooShortError, UnreadableSourceError, ZeroVarianceError
from metrics import lowpass
from models import (
    AlphaEstimate,
    ComparisonReport,
    CurvatureClass,
    EffectSize,
    GroupStats,
    PipelineConfig,
    ReportCell,
    SequenceMetrics,
    speed_bucket_labels,
    swrr_key,
)

__all__ = [
    "ALL",
    "classify_curvature",
    "cohens_d",
    "summarize_group",
    "bucket_by_speed",
    "build_report",
    "plot_series",
    "write_report",
    "write_effect_sizes",
    "write_plot_data",
]

logger = logging.getLogger(__name__)

# Condition and bucket label covering every sequence
ALL = "all"

CONDITIONS: tuple[str, ...] = (ALL, CurvatureClass.STRAIGHT.value, CurvatureClass.CURVED.value)

# Reversal gap exported as plot data next to steering entropy
PLOT_GAP = 2.0


def classify_curvature(
    theta_window: np.ndarray | list[float],
    cfg: PipelineConfig,
    rate: float | None = None,
    filtered: bool = False,
) -> CurvatureClass:
    """
    Classify a steering window as straight or curved driving.

    The window is curved when the share of low-pass filtered samples with
    ``|theta| > cfg.curvature_threshold`` exceeds ``cfg.curvature_fraction``.

    Args:
        theta_window: Steering angles in degrees.
        cfg: Pipeline configuration.
        rate: Sample rate in Hz; defaults to ``cfg.nominal_rate``.
        filtered: Set when ``theta_window`` is already low-pass filtered.

    Raises:
        TooShortError: If the window is empty.
    """
    theta = np.asarray(theta_window, dtype=np.float64)
    if theta.size == 0:
        raise TooShortError(0, 1)
    if not filtered:
        theta = lowpass(theta, rate or cfg.nominal_rate, cfg.lowpass_cutoff, cfg.lowpass_order)
    share = float(np.mean(np.abs(theta) > cfg.curvature_threshold))
    return CurvatureClass.CURVED if share > cfg.curvature_fraction else CurvatureClass.STRAIGHT


def cohens_d(a: np.ndarray | list[float], b: np.ndarray | list[float]) -> float:
    """
    Standardized mean difference of ``a`` over ``b`` with pooled SD.

    Sample variances use the n - 1 denominator; no small-sample correction
    is applied.

    Raises:
        TooShortError: If either group has fewer than two values.
        ZeroVarianceError: If the pooled standard deviation is zero.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    for group in (x, y):
        if group.size < 2:
            raise TooShortError(int(group.size), 2)
    pooled_var = ((x.size - 1) * x.var(ddof=1) + (y.size - 1) * y.var(ddof=1)) / (
        x.size + y.size - 2
    )
    pooled_sd = math.sqrt(pooled_var)
    if pooled_sd == 0:
        raise ZeroVarianceError()
    return float((x.mean() - y.mean()) / pooled_sd)


def summarize_group(values: np.ndarray | list[float]) -> GroupStats:
    """Mean, sample SD and count; statistics stay null below two values."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        return GroupStats(n=int(x.size))
    return GroupStats(mean=float(x.mean()), sd=float(x.std(ddof=1)), n=int(x.size))


def _finite_edges(edges: list[float]) -> list[float]:
    return [e for e in edges if math.isfinite(e)]


def bucket_by_speed(
    metrics: list[SequenceMetrics], edges: list[float]
) -> dict[str, list[SequenceMetrics]]:
    """
    Group sequences by mean speed into half-open buckets.

    Bucket i holds ``edges[i] <= speed < edges[i + 1]``; speeds at or above
    the last finite edge go to the open top bucket and speeds below the first
    edge to the first bucket, so the buckets partition the input.

    Returns:
        Every bucket label in ascending order, empty buckets included.
    """
    finite = _finite_edges(edges)
    labels = speed_bucket_labels(finite)
    grouped: dict[str, list[SequenceMetrics]] = {label: [] for label in labels}
    if not metrics:
        return grouped
    speeds = np.array([m.mean_speed for m in metrics])
    index = np.clip(np.searchsorted(finite, speeds, side="right") - 1, 0, len(labels) - 1)
    for m, i in zip(metrics, index.tolist(), strict=True):
        grouped[labels[i]].append(m)
    return grouped


def _select(metrics: list[SequenceMetrics], condition: str) -> list[SequenceMetrics]:
    if condition == ALL:
        return metrics
    return [m for m in metrics if m.curvature.value == condition]


def _cell(
    metric: str,
    condition: str,
    bucket: str,
    interaction: list[SequenceMetrics],
    baseline: list[SequenceMetrics],
) -> ReportCell:
    a = [m.metric(metric) for m in interaction]
    b = [m.metric(metric) for m in baseline]
    if len(a) < 2 or len(b) < 2:
        return ReportCell(
            metric=metric,
            curvature=condition,
            bucket=bucket,
            interaction=GroupStats(n=len(a)),
            baseline=GroupStats(n=len(b)),
        )
    try:
        d: float | None = cohens_d(a, b)
    except ZeroVarianceError:
        logger.debug("Zero pooled variance for %s/%s/%s", metric, condition, bucket)
        d = None
    return ReportCell(
        metric=metric,
        curvature=condition,
        bucket=bucket,
        interaction=summarize_group(a),
        baseline=summarize_group(b),
        d=d,
    )


def build_report(
    interaction_metrics: list[SequenceMetrics],
    baseline_metrics: list[SequenceMetrics],
    cfg: PipelineConfig,
    alpha: AlphaEstimate | None = None,
) -> ComparisonReport:
    """
    Compare interaction against baseline metrics.

    One cell per metric, curvature condition (all, straight, curved) and
    speed bucket (all plus each configured bucket). Each cell holds group
    statistics for both groups and Cohen's d of interaction minus baseline;
    cells with fewer than two sequences in either group keep their counts
    but null statistics. The bucket-``all`` effect sizes are collected as
    the report's effect-size list.

    Raises:
        MissingInputError: If either group is empty.
    """
    if not interaction_metrics or not baseline_metrics:
        raise MissingInputError("Both interaction and baseline metrics are required")

    labels = cfg.bucket_labels
    cells: list[ReportCell] = []
    effects: list[EffectSize] = []
    for metric in cfg.metric_names:
        for condition in CONDITIONS:
            inter = _select(interaction_metrics, condition)
            base = _select(baseline_metrics, condition)
            overall = _cell(metric, condition, ALL, inter, base)
            cells.append(overall)
            if overall.d is not None:
                effects.append(
                    EffectSize(
                        metric=metric,
                        condition=condition,
                        d=overall.d,
                        n_interaction=overall.interaction.n,
                        n_baseline=overall.baseline.n,
                    )
                )
            inter_buckets = bucket_by_speed(inter, cfg.speed_bucket_edges)
            base_buckets = bucket_by_speed(base, cfg.speed_bucket_edges)
            for label in labels:
                cells.append(
                    _cell(metric, condition, label, inter_buckets[label], base_buckets[label])
                )

    logger.info(
        "Report over %d interaction and %d baseline sequence(s): %d cell(s), %d effect size(s)",
        len(interaction_metrics),
        len(baseline_metrics),
        len(cells),
        len(effects),
    )
    return ComparisonReport(
        metrics=cfg.metric_names,
        bucket_labels=labels,
        cells=cells,
        effect_sizes=effects,
        alpha=alpha,
        config=cfg,
    )


def _plot_metric(cfg: PipelineConfig) -> str:
    """Reversal-rate metric closest to the 2 degree gap."""
    gap = min(cfg.swrr_gaps, key=lambda g: abs(g - PLOT_GAP))
    return swrr_key(gap)


def plot_series(report: ComparisonReport) -> list[dict[str, Any]]:
    """
    Per-bucket paired series for steering entropy and the 2 degree reversal rate.

    Uses the straight-driving condition; each series lists the bucket labels
    with interaction and baseline means, SDs and counts.
    """
    series: list[dict[str, Any]] = []
    for metric in ("se", _plot_metric(report.config)):
        cells = [report.cell(metric, CurvatureClass.STRAIGHT.value, b) for b in report.bucket_labels]
        series.append(
            {
                "metric": metric,
                "condition": CurvatureClass.STRAIGHT.value,
                "buckets": report.bucket_labels,
                "interaction_mean": [c.interaction.mean for c in cells],
                "interaction_sd": [c.interaction.sd for c in cells],
                "interaction_n": [c.interaction.n for c in cells],
                "baseline_mean": [c.baseline.mean for c in cells],
                "baseline_sd": [c.baseline.sd for c in cells],
                "baseline_n": [c.baseline.n for c in cells],
            }
        )
    return series


# --- EXPORT ---


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def _write(path: Path, writer: Callable[[Any], None]) -> None:
    try:
        with path.open("w", encoding="utf-8", newline="") as f:
            writer(f)
    except OSError as e:
        raise UnreadableSourceError(f"Failed to write {path}: {e}", path=str(path)) from e


def _dump_json(payload: Any) -> Callable[[Any], None]:
    def write(f: Any) -> None:
        json.dump(payload, f, indent=2)
        f.write("\n")

    return write


def write_report(report: ComparisonReport, path: Path, format: str = "csv") -> Path:
    """
    Write the comparison report as CSV rows or nested JSON.

    CSV has one row per metric, curvature, bucket and group with mean, sd
    and n; empty cells stand for null statistics.
    """
    if format == "json":
        _write(path, _dump_json(report.model_dump(mode="json")))
        return path

    def rows(f: Any) -> None:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["metric", "curvature", "bucket", "group", "mean", "sd", "n", "d"])
        for cell in report.cells:
            for group, stats in (("interaction", cell.interaction), ("baseline", cell.baseline)):
                writer.writerow(
                    [
                        cell.metric,
                        cell.curvature,
                        cell.bucket,
                        group,
                        _fmt(stats.mean),
                        _fmt(stats.sd),
                        stats.n,
                        _fmt(cell.d),
                    ]
                )

    _write(path, rows)
    return path


def write_effect_sizes(report: ComparisonReport, path: Path, format: str = "csv") -> Path:
    """Write the per-metric, per-condition effect sizes."""
    if format == "json":
        _write(path, _dump_json([e.model_dump(mode="json") for e in report.effect_sizes]))
        return path

    def rows(f: Any) -> None:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["metric", "condition", "d", "n_interaction", "n_baseline"])
        for e in report.effect_sizes:
            writer.writerow([e.metric, e.condition, repr(e.d), e.n_interaction, e.n_baseline])

    _write(path, rows)
    return path


def write_plot_data(report: ComparisonReport, path: Path, format: str = "csv") -> Path:
    """Write the per-bucket plot series, one CSV row per metric and bucket."""
    series = plot_series(report)
    if format == "json":
        _write(path, _dump_json(series))
        return path

    def rows(f: Any) -> None:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(
            [
                "metric",
                "condition",
                "bucket",
                "interaction_mean",
                "interaction_sd",
                "interaction_n",
                "baseline_mean",
                "baseline_sd",
                "baseline_n",
            ]
        )
        for s in series:
            for i, bucket in enumerate(s["buckets"]):
                writer.writerow(
                    [
                        s["metric"],
                        s["condition"],
                        bucket,
                        _fmt(s["interaction_mean"][i]),
                        _fmt(s["interaction_sd"][i]),
                        s["interaction_n"][i],
                        _fmt(s["baseline_mean"][i]),
                        _fmt(s["baseline_sd"][i]),
                        s["baseline_n"][i],
                    ]
                )

    _write(path, rows)
    return path
