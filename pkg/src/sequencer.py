"""Interaction and baseline sequence extraction.

Groups touchscreen events into interaction sequences, drops sequences that
overlap driver-assistance activity, and samples duration-stratified baseline
sequences from the stretches of driving with no interaction.
"""

import json
import logging
from collections.abc import Iterable
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from exceptions import (
    InsufficientEligibleDataError,
    MissingInputError,
    UnreadableSourceError,
)
from models import (
    AdasInterval,
    Drive,
    PipelineConfig,
    Sequence,
    SequenceKind,
    StratificationPlan,
)

__all__ = [
    "extract_interaction_sequences",
    "filter_adas_active",
    "eligible_baseline_spans",
    "build_stratification_plan",
    "sample_baselines",
    "sequences_to_jsonl",
    "read_sequences",
    "attach_events",
]

logger = logging.getLogger(__name__)

Span = tuple[float, float]

# Attempts at drawing a baseline whose realized length lands in its bin
_MAX_DRAWS = 50

# Bin edges are compared at nanosecond resolution
_EDGE_DECIMALS = 9


def _window(core_start: float, core_end: float, span: Span, t_buffer: float) -> tuple[float, float, bool]:
    window_start = core_start - t_buffer
    window_end = core_end + t_buffer
    clipped = window_start < span[0] or window_end > span[1]
    return max(window_start, span[0]), min(window_end, span[1]), clipped


def extract_interaction_sequences(drive: Drive, cfg: PipelineConfig) -> list[Sequence]:
    """
    Group the UI events of a drive into interaction sequences.

    Events are scanned in time order; an event joins the current group when
    it follows the previous event by strictly less than ``cfg.t_max``. The
    core spans the first to last event of a group and the window adds
    ``cfg.t_buffer`` on each side, clipped to the drive span.

    Args:
        drive: A validated drive.
        cfg: Pipeline configuration.

    Returns:
        Sequences sorted by core start; empty when the drive has no events.
    """
    groups: list[list[int]] = []
    for i, event in enumerate(drive.ui_events):
        if groups and event.time - drive.ui_events[groups[-1][-1]].time < cfg.t_max:
            groups[-1].append(i)
        else:
            groups.append([i])

    sequences: list[Sequence] = []
    for group in groups:
        events = tuple(drive.ui_events[i] for i in group)
        core_start, core_end = events[0].time, events[-1].time
        window_start, window_end, clipped = _window(core_start, core_end, drive.span, cfg.t_buffer)
        sequences.append(
            Sequence(
                drive_id=drive.drive_id,
                kind=SequenceKind.INTERACTION,
                core_start=core_start,
                core_end=core_end,
                window_start=window_start,
                window_end=window_end,
                events=events,
                clipped=clipped,
            )
        )
    logger.debug("Drive %s: %d interaction sequence(s)", drive.drive_id, len(sequences))
    return sequences


def filter_adas_active(sequences: list[Sequence], adas: Iterable[AdasInterval]) -> list[Sequence]:
    """Keep the sequences whose closed window touches no ADAS interval."""
    intervals = list(adas)
    kept = [
        s
        for s in sequences
        if not any(a.intersects(s.window_start, s.window_end) for a in intervals)
    ]
    if len(kept) < len(sequences):
        logger.debug("Dropped %d sequence(s) overlapping ADAS activity", len(sequences) - len(kept))
    return kept


def _merge(intervals: Iterable[Span]) -> list[Span]:
    merged: list[list[float]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(s, e) for s, e in merged]


def eligible_baseline_spans(drive: Drive, cfg: PipelineConfig) -> list[Span]:
    """
    Maximal stretches of a drive free of interaction windows and ADAS.

    Every interaction window of the drive is excluded, whether or not it
    survives ADAS filtering, so each UI event is kept ``t_buffer`` away from
    any baseline.

    Returns:
        Non-empty (start, end) spans in time order.
    """
    excluded = [(s.window_start, s.window_end) for s in extract_interaction_sequences(drive, cfg)]
    excluded += [(a.start, a.end) for a in drive.adas]

    spans: list[Span] = []
    cursor, span_end = drive.span
    for start, end in _merge(excluded):
        if start > cursor:
            spans.append((cursor, min(start, span_end)))
        cursor = max(cursor, end)
        if cursor >= span_end:
            break
    if cursor < span_end:
        spans.append((cursor, span_end))
    return [(s, e) for s, e in spans if e > s]


def build_stratification_plan(sequences: list[Sequence], n_bins: int = 10) -> StratificationPlan:
    """
    Bin interaction window durations at their quantiles.

    Edges are the ``n_bins``-quantiles of the durations, rounded to
    ``_EDGE_DECIMALS`` so durations differing only by float error share an
    edge, with duplicates removed; the targets are the per-bin interaction
    counts.
    """
    durations = np.array([s.duration for s in sequences], dtype=np.float64)
    quantiles = np.quantile(durations, np.linspace(0.0, 1.0, n_bins + 1))
    edges = np.unique(np.round(quantiles, _EDGE_DECIMALS)).tolist()
    n_targets = max(len(edges) - 1, 1)
    plan = StratificationPlan(duration_bin_edges=edges, targets=[0] * n_targets)
    targets = [0] * n_targets
    for duration in durations:
        index = plan.bin_of(float(duration))
        assert index is not None
        targets[index] += 1
    return StratificationPlan(duration_bin_edges=edges, targets=targets)


class _FreeSpans:
    """Unused eligible driving, shrinking as baselines are placed."""

    def __init__(self, corpus: list[Drive], cfg: PipelineConfig) -> None:
        self.drive_ids = [d.drive_id for d in corpus]
        owners: list[int] = []
        starts: list[float] = []
        ends: list[float] = []
        for index, drive in enumerate(corpus):
            for start, end in eligible_baseline_spans(drive, cfg):
                owners.append(index)
                starts.append(start)
                ends.append(end)
        self.owners = owners
        self.starts = starts
        self.ends = ends

    def longest(self) -> float:
        return max((e - s for s, e in zip(self.starts, self.ends, strict=True)), default=0.0)

    def place(self, duration: float, rng: np.random.Generator) -> tuple[int, float] | None:
        """Pick a start for a window of ``duration``; None when nothing fits."""
        lengths = np.asarray(self.ends) - np.asarray(self.starts)
        slack = lengths - duration
        feasible = slack >= 0
        if not feasible.any():
            return None
        weights = np.where(feasible, slack, 0.0)
        if weights.sum() > 0:
            k = int(rng.choice(weights.size, p=weights / weights.sum()))
        else:
            k = int(rng.choice(np.flatnonzero(feasible)))
        start = self.starts[k] + float(rng.uniform(0.0, slack[k]))
        owner, span_start, span_end = self.owners[k], self.starts[k], self.ends[k]
        del self.owners[k], self.starts[k], self.ends[k]
        for piece_start, piece_end in ((span_start, start), (start + duration, span_end)):
            if piece_end > piece_start:
                self.owners.insert(k, owner)
                self.starts.insert(k, piece_start)
                self.ends.insert(k, piece_end)
                k += 1
        return owner, start


def _baseline(drive_id: str, window_start: float, window_end: float, t_buffer: float) -> Sequence:
    if window_end - window_start >= 2 * t_buffer:
        core_start, core_end = window_start + t_buffer, window_end - t_buffer
    else:
        core_start = core_end = (window_start + window_end) / 2
    return Sequence(
        drive_id=drive_id,
        kind=SequenceKind.BASELINE,
        core_start=core_start,
        core_end=core_end,
        window_start=window_start,
        window_end=window_end,
    )


def _draw_duration(lo: float, hi: float, last: bool, rng: np.random.Generator) -> float:
    if hi <= lo:
        return lo
    d = float(rng.uniform(lo, hi))
    if d >= hi and not last:
        d = float(np.nextafter(hi, lo))
    return min(d, hi)


def sample_baselines(
    corpus: list[Drive],
    interaction_seqs: list[Sequence],
    cfg: PipelineConfig,
) -> list[Sequence]:
    """
    Sample baseline sequences matching the interaction duration histogram.

    Duration bins are filled from the longest to the shortest. Each baseline
    gets a duration drawn uniformly within its bin (capped at the longest
    free span), a free span chosen with probability proportional to the
    room it leaves for the start, and a uniform start; the span is then
    split so baselines never overlap. All draws come from
    ``cfg.rng_seed``.

    Args:
        corpus: Drives to sample from, in a fixed order.
        interaction_seqs: Interaction sequences whose durations are matched.
        cfg: Pipeline configuration.

    Returns:
        Baseline sequences sorted by drive order and window start.

    Raises:
        MissingInputError: If there are no interaction sequences.
        InsufficientEligibleDataError: If any bin misses its target; the
            partial sample is attached to the error.
    """
    if not interaction_seqs:
        raise MissingInputError("No interaction sequences to match baselines against")

    plan = build_stratification_plan(interaction_seqs, cfg.stratification_bins)
    free = _FreeSpans(corpus, cfg)
    rng = np.random.default_rng(cfg.rng_seed)
    placed: list[tuple[int, Sequence]] = []
    shortfall: dict[int, int] = {}

    for b in reversed(range(plan.n_bins)):
        lo, hi = plan.bin_bounds(b)
        last = b == plan.n_bins - 1
        for filled in range(plan.targets[b]):
            longest = free.longest()
            if longest < lo:
                shortfall[b] = plan.targets[b] - filled
                break
            baseline: Sequence | None = None
            owner = -1
            for _ in range(_MAX_DRAWS):
                duration = _draw_duration(lo, min(hi, longest), last or longest < hi, rng)
                spot = free.place(duration, rng)
                if spot is None:
                    continue
                owner, start = spot
                candidate = _baseline(free.drive_ids[owner], start, start + duration, cfg.t_buffer)
                if plan.bin_of(candidate.duration) == b:
                    baseline = candidate
                    break
                # Realized length rounded out of the bin; the span piece is
                # already consumed, so retry elsewhere
            if baseline is None:
                shortfall[b] = plan.targets[b] - filled
                break
            placed.append((owner, baseline))

    placed.sort(key=lambda item: (item[0], item[1].window_start))
    baselines = [s for _, s in placed]
    logger.info(
        "Sampled %d baseline(s) for %d interaction sequence(s) across %d duration bin(s)",
        len(baselines),
        len(interaction_seqs),
        plan.n_bins,
    )
    if shortfall:
        raise InsufficientEligibleDataError(shortfall, baselines)
    return baselines


# --- SERIALIZATION ---


def sequences_to_jsonl(sequences: Iterable[Sequence], path: Path) -> int:
    """Write sequences one JSON object per line; returns the count written."""
    count = 0
    try:
        with path.open("w", encoding="utf-8") as f:
            for sequence in sequences:
                f.write(json.dumps(sequence.to_record()))
                f.write("\n")
                count += 1
    except OSError as e:
        raise UnreadableSourceError(f"Failed to write {path}: {e}", path=str(path)) from e
    return count


def read_sequences(path: Path) -> list[Sequence]:
    """
    Read a sequence JSONL file written by ``sequences_to_jsonl``.

    Events are not stored in the file; use ``attach_events`` to restore them.

    Raises:
        MissingInputError: If the file does not exist.
        UnreadableSourceError: If a line is not a valid sequence record.
    """
    if not path.is_file():
        raise MissingInputError(f"Sequence file not found: {path}")
    sequences: list[Sequence] = []
    with path.open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                record.pop("n_events", None)
                sequences.append(Sequence.model_validate(record))
            except (json.JSONDecodeError, AttributeError, ValidationError) as e:
                raise UnreadableSourceError(
                    f"{path}:{line_no}: invalid sequence record ({e})", path=str(path)
                ) from e
    return sequences


def attach_events(sequence: Sequence, drive: Drive) -> Sequence:
    """Restore the UI events inside the core of an interaction sequence."""
    if sequence.kind is SequenceKind.BASELINE:
        return sequence
    events = tuple(e for e in drive.ui_events if sequence.core_start <= e.time <= sequence.core_end)
    return sequence.model_copy(update={"events": events})
