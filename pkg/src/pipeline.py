"""Pipeline orchestration.

Runs the three batch stages behind the CLI:

* synth: generate a synthetic corpus and write it as drive logs.
* extract: ingest drive logs, extract interaction sequences, drop those
  overlapping ADAS activity and sample matched baselines.
* report: estimate alpha from the baselines, compute per-sequence metrics
  and write the comparison report.

Per-drive work fans out over worker processes; every merge keeps input
order so outputs only depend on inputs, configuration and seed.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

from config import TOOL_VERSION
from exceptions import (
    DataError,
    InsufficientEligibleDataError,
    MissingInputError,
    UnreadableSourceError,
    WindowTooShortError,
)
from ingest import IngestedFile, ingest_file, write_drive_log
from metrics import compute_sequence_metrics, estimate_alpha, sequence_residuals
from models import (
    AlphaEstimate,
    ComparisonReport,
    Drive,
    GroundTruth,
    LogFormat,
    PipelineConfig,
    ResidualSeries,
    RunCounts,
    RunManifest,
    Sequence,
    SequenceMetrics,
    SynthConfig,
    SynthCorpusConfig,
    validate_corpus,
)
from sequencer import (
    attach_events,
    extract_interaction_sequences,
    filter_adas_active,
    read_sequences,
    sample_baselines,
    sequences_to_jsonl,
)
from stats_report import build_report, write_effect_sizes, write_plot_data, write_report
from synth import corpus_template, derive_seed, generate_drive
from utils.artifacts import ensure_out_dir, hash_inputs, write_json, write_manifest
from utils.parallel import ordered_map
from utils.timing import StageTimer

__all__ = [
    "INTERACTION_FILE",
    "BASELINE_FILE",
    "METRICS_FILE",
    "TRUTH_FILE",
    "ExtractResult",
    "ReportResult",
    "load_drives",
    "run_synth",
    "run_extract",
    "run_report",
]

logger = logging.getLogger(__name__)

INTERACTION_FILE = "interaction_sequences.jsonl"
BASELINE_FILE = "baseline_sequences.jsonl"
METRICS_FILE = "metrics.jsonl"
TRUTH_FILE = "truth.json"


@dataclass
class ExtractResult:
    """Sequences and manifest produced by the extract stage."""

    drives: list[Drive]
    interactions: list[Sequence]
    baselines: list[Sequence]
    manifest: RunManifest


@dataclass
class ReportResult:
    """Metrics, report and manifest produced by the report stage."""

    alpha: AlphaEstimate
    interaction_metrics: list[SequenceMetrics]
    baseline_metrics: list[SequenceMetrics]
    report: ComparisonReport
    manifest: RunManifest
    outputs: list[Path] = field(default_factory=list)


# --- SYNTH ---


def _synth_one(job: tuple[SynthConfig, str]) -> tuple[Drive, GroundTruth]:
    drive_cfg, drive_id = job
    return generate_drive(drive_cfg, drive_id)


def run_synth(
    cfg: SynthCorpusConfig,
    out_dir: Path,
    jobs: int = 1,
    format: LogFormat = LogFormat.JSONL,
) -> list[Path]:
    """
    Generate a synthetic corpus and write one drive log per drive.

    Ground truth for every drive goes to ``truth.json``.

    Returns:
        Paths of the written drive logs.
    """
    ensure_out_dir(out_dir)
    template = corpus_template(cfg)
    work = [
        (
            template.model_copy(update={"rng_seed": derive_seed(cfg.rng_seed, i)}),
            f"{cfg.drive_id_prefix}-{i:04d}",
        )
        for i in range(cfg.n_drives)
    ]
    corpus = ordered_map(_synth_one, work, jobs)

    paths: list[Path] = []
    for drive, _ in corpus:
        path = out_dir / f"{drive.drive_id}.{LogFormat(format).value}"
        write_drive_log(drive, path, format)
        paths.append(path)
    write_json(out_dir / TRUTH_FILE, [truth.model_dump(mode="json") for _, truth in corpus])
    logger.info("Wrote %d synthetic drive log(s) to %s", len(paths), out_dir)
    return paths


# --- EXTRACT ---


def _ingest_one(path: Path, nominal_rate: float, max_gap: float) -> IngestedFile:
    try:
        return ingest_file(path, None, nominal_rate, max_gap)
    except DataError as e:
        logger.warning("Skipping %s: %s", path, e.message)
        return IngestedFile(path=path)


def load_drives(inputs: list[Path], cfg: PipelineConfig, jobs: int = 1) -> tuple[list[Drive], int]:
    """
    Ingest drive logs, one worker per file.

    Unreadable or empty logs are skipped with a warning, as are drives whose
    id repeats an earlier one.

    Returns:
        The drives in input order and the number of rejected lines.

    Raises:
        MissingInputError: If no valid drive remains.
    """
    ingested = ordered_map(
        partial(_ingest_one, nominal_rate=cfg.nominal_rate, max_gap=cfg.max_gap), inputs, jobs
    )
    drives = [d for result in ingested for d in result.drives]
    rejected = sum(len(result.rejects) for result in ingested)

    duplicates = {v.index for v in validate_corpus(drives)}
    if duplicates:
        logger.warning("Dropping %d drive(s) with duplicate ids", len(duplicates))
        drives = [d for i, d in enumerate(drives) if i not in duplicates]
    if not drives:
        raise MissingInputError("No valid drives in the inputs")
    logger.info("Ingested %d drive(s) from %d file(s), %d rejected line(s)", len(drives), len(inputs), rejected)
    return drives, rejected


def _extract_one(drive: Drive, cfg: PipelineConfig) -> tuple[int, list[Sequence]]:
    sequences = extract_interaction_sequences(drive, cfg)
    return len(sequences), filter_adas_active(sequences, drive.adas)


def run_extract(
    inputs: list[Path],
    cfg: PipelineConfig,
    out_dir: Path,
    jobs: int = 1,
) -> ExtractResult:
    """
    Ingest drives, extract interaction sequences and sample baselines.

    Writes both sequence sets as JSONL plus the run manifest. A baseline
    shortfall is logged and the partial sample kept.

    Raises:
        MissingInputError: If there are no valid drives or no interaction
            sequence survives ADAS filtering.
    """
    timer = StageTimer()
    ensure_out_dir(out_dir)
    with timer.stage("ingest"):
        drives, rejected = load_drives(inputs, cfg, jobs)

    with timer.stage("extract"):
        extracted = ordered_map(partial(_extract_one, cfg=cfg), drives, jobs)
        n_found = sum(n for n, _ in extracted)
        interactions = [s for _, kept in extracted for s in kept]
    dropped = n_found - len(interactions)
    if dropped:
        logger.warning("Dropped %d interaction sequence(s) overlapping ADAS activity", dropped)

    counts = RunCounts(
        drives=len(drives),
        rejected_lines=rejected,
        interaction_sequences=len(interactions),
        dropped_adas=dropped,
    )
    baselines: list[Sequence] = []
    if interactions:
        with timer.stage("sample"):
            try:
                baselines = sample_baselines(drives, interactions, cfg)
            except InsufficientEligibleDataError as e:
                logger.warning("%s; continuing with %d baseline(s)", e.message, len(e.partial))
                baselines = e.partial
                counts.shortfall = {str(b): n for b, n in sorted(e.shortfall.items())}
    counts.baselines = len(baselines)

    with timer.stage("write"):
        sequences_to_jsonl(interactions, out_dir / INTERACTION_FILE)
        sequences_to_jsonl(baselines, out_dir / BASELINE_FILE)
        manifest = RunManifest(
            tool_version=TOOL_VERSION,
            stage="extract",
            config=cfg,
            inputs=hash_inputs(inputs),
            counts=counts,
        )
    manifest.timings = timer.timings
    write_manifest(manifest, out_dir)

    logger.info(
        "Extracted %d interaction sequence(s) and %d baseline(s) in %.3f s",
        len(interactions),
        len(baselines),
        timer.total,
    )
    if not interactions:
        raise MissingInputError("No interaction sequences survived extraction")
    return ExtractResult(drives, interactions, baselines, manifest)


# --- REPORT ---


def _group_by_drive(
    drives: list[Drive], sequences: list[Sequence]
) -> list[tuple[Drive, list[Sequence]]]:
    by_id: dict[str, list[Sequence]] = {}
    for sequence in sequences:
        by_id.setdefault(sequence.drive_id, []).append(sequence)
    known = {d.drive_id for d in drives}
    orphans = [drive_id for drive_id in by_id if drive_id not in known]
    if orphans:
        logger.warning("Skipping sequences of %d unknown drive(s): %s", len(orphans), ", ".join(orphans))
    return [(d, by_id[d.drive_id]) for d in drives if d.drive_id in by_id]


def _residuals_one(job: tuple[Drive, list[Sequence]], cfg: PipelineConfig) -> list[ResidualSeries]:
    drive, sequences = job
    residuals: list[ResidualSeries] = []
    for sequence in sequences:
        try:
            residuals.append(sequence_residuals(drive, sequence, cfg))
        except WindowTooShortError as e:
            logger.warning("Skipping baseline: %s", e.message)
    return residuals


def _metrics_one(
    job: tuple[Drive, list[Sequence]], alpha: AlphaEstimate, cfg: PipelineConfig
) -> list[SequenceMetrics]:
    drive, sequences = job
    results: list[SequenceMetrics] = []
    for sequence in sequences:
        try:
            results.append(compute_sequence_metrics(drive, attach_events(sequence, drive), alpha, cfg))
        except WindowTooShortError as e:
            logger.warning("Skipping sequence: %s", e.message)
    return results


def _write_metrics(metrics: list[SequenceMetrics], path: Path) -> None:
    try:
        with path.open("w", encoding="utf-8") as f:
            for m in metrics:
                f.write(json.dumps(m.model_dump(mode="json")))
                f.write("\n")
    except OSError as e:
        raise UnreadableSourceError(f"Failed to write {path}: {e}", path=str(path)) from e


def run_report(
    sequences_dir: Path,
    inputs: list[Path],
    cfg: PipelineConfig,
    out_dir: Path,
    jobs: int = 1,
    format: str = "csv",
    drives: list[Drive] | None = None,
) -> ReportResult:
    """
    Estimate alpha, compute sequence metrics and write the report.

    Args:
        sequences_dir: Directory holding the extract stage's sequence files.
        inputs: Drive logs the sequences were extracted from.
        cfg: Pipeline configuration.
        out_dir: Output directory.
        jobs: Worker processes.
        format: ``csv`` or ``json`` for the report files.
        drives: Already ingested drives; skips re-reading ``inputs``.

    Raises:
        MissingInputError: If sequence files or baselines are missing.
        DegenerateBaselineError: If alpha comes out as zero.
    """
    timer = StageTimer()
    ensure_out_dir(out_dir)
    with timer.stage("load"):
        interactions = read_sequences(sequences_dir / INTERACTION_FILE)
        baselines = read_sequences(sequences_dir / BASELINE_FILE)
        if not baselines:
            raise MissingInputError(f"No baseline sequences in {sequences_dir / BASELINE_FILE}")
        if not interactions:
            raise MissingInputError(f"No interaction sequences in {sequences_dir / INTERACTION_FILE}")
        rejected = 0
        if drives is None:
            drives, rejected = load_drives(inputs, cfg, jobs)

    baseline_jobs = _group_by_drive(drives, baselines)
    interaction_jobs = _group_by_drive(drives, interactions)

    with timer.stage("alpha"):
        per_drive = ordered_map(partial(_residuals_one, cfg=cfg), baseline_jobs, jobs)
        alpha = estimate_alpha([r for rs in per_drive for r in rs], cfg.alpha_percentile)

    with timer.stage("metrics"):
        metric_fn = partial(_metrics_one, alpha=alpha, cfg=cfg)
        interaction_metrics = [m for ms in ordered_map(metric_fn, interaction_jobs, jobs) for m in ms]
        baseline_metrics = [m for ms in ordered_map(metric_fn, baseline_jobs, jobs) for m in ms]

    with timer.stage("report"):
        report = build_report(interaction_metrics, baseline_metrics, cfg, alpha)

    suffix = "json" if format == "json" else "csv"
    with timer.stage("write"):
        metrics_path = out_dir / METRICS_FILE
        _write_metrics(interaction_metrics + baseline_metrics, metrics_path)
        outputs = [
            metrics_path,
            write_report(report, out_dir / f"report.{suffix}", suffix),
            write_effect_sizes(report, out_dir / f"effect_sizes.{suffix}", suffix),
            write_plot_data(report, out_dir / f"plot_data.{suffix}", suffix),
        ]
        manifest = RunManifest(
            tool_version=TOOL_VERSION,
            stage="report",
            config=cfg,
            inputs=hash_inputs(
                [*inputs, sequences_dir / INTERACTION_FILE, sequences_dir / BASELINE_FILE]
            ),
            counts=RunCounts(
                drives=len(drives),
                rejected_lines=rejected,
                interaction_sequences=len(interactions),
                baselines=len(baselines),
                metrics_interaction=len(interaction_metrics),
                metrics_baseline=len(baseline_metrics),
            ),
            alpha=alpha,
        )
    manifest.timings = timer.timings
    outputs.append(write_manifest(manifest, out_dir, prefix="report_"))

    logger.info(
        "Computed metrics for %d interaction and %d baseline sequence(s), alpha %.6g, in %.3f s",
        len(interaction_metrics),
        len(baseline_metrics),
        alpha.alpha,
        timer.total,
    )
    return ReportResult(alpha, interaction_metrics, baseline_metrics, report, manifest, outputs)
