"""Domain models for the steermetrics pipeline.

This module contains the types shared by every pipeline stage: enums for the
categorical signal values, numpy-backed trace containers for the uniformly
sampled signals, Pydantic models for everything that is configured or
serialized (events, sequences, metrics, reports, manifests), and the drive
invariant checker.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

__all__ = [
    # Enums
    "AdasFeature",
    "CurvatureClass",
    "Gesture",
    "LogFormat",
    "PredictorKind",
    "RecordKind",
    "SequenceKind",
    # Signals
    "Trace",
    "SteeringTrace",
    "SpeedTrace",
    "UIEvent",
    "AdasInterval",
    "Drive",
    "RawRecord",
    "RejectedLine",
    "ParsedLog",
    # Sequences and metrics
    "Sequence",
    "StratificationPlan",
    "PipelineConfig",
    "swrr_key",
    "speed_bucket_labels",
    "SequenceMetrics",
    "AlphaEstimate",
    "ResidualSeries",
    "BinDistribution",
    # Reports
    "GroupStats",
    "ReportCell",
    "EffectSize",
    "ComparisonReport",
    "InputFile",
    "RunCounts",
    "RunManifest",
    # Synthetic drives
    "RoadSegment",
    "CorrectionModel",
    "DistractionEpisode",
    "SpeedSegment",
    "SynthConfig",
    "EpisodeLayout",
    "SynthCorpusConfig",
    "EpisodeLabel",
    "GroundTruth",
    # Validation
    "Violation",
    "validate_drive",
    "validate_corpus",
]

# Slack for comparing float timestamps
_TIME_EPS = 1e-9


# --- ENUMS ---


class Gesture(str, Enum):
    """Touchscreen gesture kind."""

    TAP = "tap"
    DRAG = "drag"
    SWIPE = "swipe"
    OTHER = "other"


class AdasFeature(str, Enum):
    """Driver-assistance feature whose activity disqualifies a window."""

    CRUISE_CONTROL = "cruise_control"
    STEERING_ASSIST = "steering_assist"


class RecordKind(str, Enum):
    """Kind of a raw drive-log record."""

    STEER = "steer"
    SPEED = "speed"
    ADAS = "adas"
    UI = "ui"


class SequenceKind(str, Enum):
    """Whether a sequence holds touchscreen interactions or none."""

    INTERACTION = "interaction"
    BASELINE = "baseline"


class CurvatureClass(str, Enum):
    """Driving condition of a sequence window."""

    STRAIGHT = "straight"
    CURVED = "curved"


class PredictorKind(str, Enum):
    """Steering-angle predictor used for entropy residuals."""

    TAYLOR = "taylor"
    QUADRATIC = "quadratic"


class LogFormat(str, Enum):
    """Serialized drive-log format."""

    JSONL = "jsonl"
    CSV = "csv"


# --- SIGNALS ---


@dataclass(frozen=True, eq=False)
class Trace:
    """Uniformly sampled signal: t_i = start_time + i / sample_rate.

    Values are stored as a read-only float64 array.

    Attributes:
        start_time: Time of the first sample in seconds.
        sample_rate: Sampling rate in Hz.
        values: Sample values.
    """

    start_time: float
    sample_rate: float
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        assert isinstance(other, Trace)
        return (
            self.start_time == other.start_time
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def period(self) -> float:
        """Sample period in seconds."""
        return 1.0 / self.sample_rate

    @property
    def end_time(self) -> float:
        """Time of the last sample."""
        return self.time_at(len(self) - 1) if len(self) else self.start_time

    def time_at(self, index: int) -> float:
        """Timestamp of sample ``index`` by index math."""
        return self.start_time + index / self.sample_rate

    def timestamps(self) -> np.ndarray:
        """All sample timestamps."""
        return self.start_time + np.arange(len(self)) / self.sample_rate


@dataclass(frozen=True, eq=False)
class SteeringTrace(Trace):
    """Steering wheel angle in degrees; sign convention kept as received."""


@dataclass(frozen=True, eq=False)
class SpeedTrace(Trace):
    """Vehicle speed in km/h."""


class UIEvent(BaseModel):
    """Touchscreen interaction with one UI element."""

    model_config = ConfigDict(frozen=True)

    time: float
    element_id: str
    gesture: Gesture


class AdasInterval(BaseModel):
    """Closed interval during which a driver-assistance feature was active."""

    model_config = ConfigDict(frozen=True)

    start: float
    end: float
    feature: AdasFeature

    def intersects(self, start: float, end: float) -> bool:
        """Closed-interval overlap test; touching endpoints overlap."""
        return start <= self.end and self.start <= end


@dataclass(frozen=True)
class Drive:
    """One vehicle trip with its signals and event streams.

    Attributes:
        drive_id: Identifier, unique within a corpus.
        steering: Steering wheel angle trace.
        speed: Vehicle speed trace on the same grid as steering.
        ui_events: Touchscreen events sorted by time.
        adas: Normalized driver-assistance intervals.
    """

    drive_id: str
    steering: SteeringTrace
    speed: SpeedTrace
    ui_events: tuple[UIEvent, ...] = ()
    adas: tuple[AdasInterval, ...] = ()

    @property
    def span(self) -> tuple[float, float]:
        """Covered time span, taken from the steering trace."""
        return self.steering.start_time, self.steering.end_time


@dataclass(frozen=True, slots=True)
class RawRecord:
    """One parsed drive-log line.

    Only the fields belonging to ``kind`` are set: ``value`` for steer and
    speed, ``feature`` and ``active`` for adas, ``element`` and ``gesture``
    for ui.
    """

    t: float
    kind: RecordKind
    value: float | None = None
    feature: AdasFeature | None = None
    active: bool | None = None
    element: str | None = None
    gesture: Gesture | None = None


@dataclass(frozen=True, slots=True)
class RejectedLine:
    """A drive-log line that could not be parsed."""

    line_no: int
    reason: str
    text: str


@dataclass
class ParsedLog:
    """Records of one drive log plus the lines that were rejected."""

    records: list[RawRecord] = field(default_factory=list)
    rejects: list[RejectedLine] = field(default_factory=list)


# --- SEQUENCES ---


class Sequence(BaseModel):
    """Time window around a group of interactions, or a sampled baseline.

    The window is the core extended by the buffer on each side and clipped
    to the drive span; ``clipped`` records whether clipping happened.
    """

    model_config = ConfigDict(frozen=True)

    drive_id: str
    kind: SequenceKind
    core_start: float
    core_end: float
    window_start: float
    window_end: float
    events: tuple[UIEvent, ...] = ()
    clipped: bool = False

    @property
    def n_events(self) -> int:
        return len(self.events)

    @property
    def duration(self) -> float:
        """Window length in seconds."""
        return self.window_end - self.window_start

    @property
    def core_duration(self) -> float:
        return self.core_end - self.core_start

    def to_record(self) -> dict[str, Any]:
        """Flat JSONL record without the event payload."""
        return {
            "drive_id": self.drive_id,
            "kind": self.kind.value,
            "core_start": self.core_start,
            "core_end": self.core_end,
            "window_start": self.window_start,
            "window_end": self.window_end,
            "n_events": self.n_events,
            "clipped": self.clipped,
        }


class StratificationPlan(BaseModel):
    """Duration-bin edges and per-bin baseline targets.

    Bins are half-open ``[e_i, e_{i+1})`` except the last, which is closed.
    A single-edge plan describes one degenerate bin holding exactly that
    duration.
    """

    duration_bin_edges: list[float]
    targets: list[int]

    @model_validator(mode="after")
    def _check_shape(self) -> "StratificationPlan":
        edges = self.duration_bin_edges
        if not edges:
            raise ValueError("at least one bin edge required")
        if any(b <= a for a, b in zip(edges, edges[1:], strict=False)):
            raise ValueError("bin edges must be strictly ascending")
        if len(self.targets) != max(len(edges) - 1, 1):
            raise ValueError("one target per bin required")
        if any(t < 0 for t in self.targets):
            raise ValueError("targets must be non-negative")
        return self

    @property
    def n_bins(self) -> int:
        return len(self.targets)

    def bin_bounds(self, index: int) -> tuple[float, float]:
        edges = self.duration_bin_edges
        if len(edges) == 1:
            return edges[0], edges[0]
        return edges[index], edges[index + 1]

    def bin_of(self, duration: float, tol: float = 1e-9) -> int | None:
        """Index of the bin holding ``duration``, or None when outside.

        The outer edges accept values within ``tol`` so durations rebuilt
        from window bounds still land in the end bins.
        """
        edges = self.duration_bin_edges
        if len(edges) == 1:
            return 0 if abs(duration - edges[0]) <= tol else None
        if duration < edges[0] - tol or duration > edges[-1] + tol:
            return None
        if duration < edges[0]:
            return 0
        if duration >= edges[-1]:
            return len(edges) - 2
        return int(np.searchsorted(edges, duration, side="right")) - 1


class PipelineConfig(BaseModel):
    """Parameters of extraction, metrics and reporting."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    t_max: float = Field(default=10.0, gt=0, description="Max gap between grouped events (s)")
    t_buffer: float = Field(default=2.0, ge=0, description="Buffer added around cores (s)")
    alpha_percentile: float = Field(default=0.90, gt=0, lt=1)
    swrr_gaps: list[float] = Field(default_factory=lambda: [1.0, 2.0, 5.0])
    lowpass_cutoff: float = Field(default=0.6, gt=0, description="Hz")
    lowpass_order: int = Field(default=2, ge=1)
    swrr_prefilter: bool = True
    curvature_threshold: float = Field(default=10.0, ge=0, description="degrees")
    curvature_fraction: float = Field(default=0.2, ge=0, le=1)
    speed_bucket_edges: list[float] = Field(
        default_factory=lambda: [0.0, 30.0, 60.0, 90.0, 120.0],
        description="Finite bucket edges in km/h; the top bucket is open-ended",
    )
    stratification_bins: int = Field(default=10, ge=1)
    predictor: PredictorKind = PredictorKind.TAYLOR
    nominal_rate: float = Field(default=5.0, gt=0, description="Hz")
    max_gap: float = Field(default=1.0, gt=0, description="Ingest gap-split threshold (s)")
    rng_seed: int = 0

    @field_validator("swrr_gaps")
    @classmethod
    def _gaps_ascending(cls, gaps: list[float]) -> list[float]:
        if not gaps:
            raise ValueError("at least one gap required")
        if any(g <= 0 for g in gaps):
            raise ValueError("gaps must be positive")
        if any(b <= a for a, b in zip(gaps, gaps[1:], strict=False)):
            raise ValueError("gaps must be strictly ascending")
        return gaps

    @field_validator("speed_bucket_edges")
    @classmethod
    def _edges_ascending(cls, edges: list[float]) -> list[float]:
        if edges and math.isinf(edges[-1]) and edges[-1] > 0:
            edges = edges[:-1]
        if not edges:
            raise ValueError("at least one finite edge required")
        if any(not math.isfinite(e) for e in edges):
            raise ValueError("only the last edge may be infinite")
        if any(b <= a for a, b in zip(edges, edges[1:], strict=False)):
            raise ValueError("bucket edges must be strictly ascending")
        return edges

    @property
    def bucket_labels(self) -> list[str]:
        """Labels of the speed buckets, the last one open-ended."""
        return speed_bucket_labels(self.speed_bucket_edges)

    @property
    def metric_names(self) -> list[str]:
        """Names of the reported metrics: ``se`` then ``swrr_<gap>``."""
        return ["se", *(swrr_key(g) for g in self.swrr_gaps)]


def swrr_key(gap: float) -> str:
    """Metric name for the reversal rate at ``gap`` degrees."""
    return f"swrr_{gap:g}"


def speed_bucket_labels(edges: list[float]) -> list[str]:
    """Labels ``lo-hi`` per finite bucket and ``lo+`` for the open top bucket."""
    labels = [f"{lo:g}-{hi:g}" for lo, hi in zip(edges, edges[1:], strict=False)]
    labels.append(f"{edges[-1]:g}+")
    return labels


class SequenceMetrics(BaseModel):
    """Steering metrics and aggregated statistics of one sequence window."""

    drive_id: str
    kind: SequenceKind
    window_start: float
    window_end: float
    clipped: bool = False
    steering_entropy: float = Field(ge=0, le=1)
    swrr: dict[str, float] = Field(description="Reversals per minute keyed by gap in degrees")
    mean_speed: float
    speed_sd: float
    steering_sd: float
    steering_abs_mean: float
    duration: float = Field(gt=0)
    curvature: CurvatureClass
    n_interactions: int = Field(ge=0)
    interaction_density: float = Field(ge=0, description="Interactions per second")
    n_elements: int = Field(default=0, ge=0)
    gesture_counts: dict[str, int] = Field(default_factory=dict)

    @field_validator("swrr")
    @classmethod
    def _rates_non_negative(cls, swrr: dict[str, float]) -> dict[str, float]:
        if any(v < 0 for v in swrr.values()):
            raise ValueError("reversal rates must be non-negative")
        return swrr

    def metric(self, name: str) -> float:
        """Value of ``se`` or ``swrr_<gap>``."""
        if name == "se":
            return self.steering_entropy
        if name.startswith("swrr_"):
            return self.swrr[name.removeprefix("swrr_")]
        raise KeyError(name)


class AlphaEstimate(BaseModel):
    """Steering entropy normalization constant averaged over baselines."""

    alpha: float = Field(gt=0, description="degrees")
    n_baseline_sequences: int = Field(ge=1)
    percentile_used: float = Field(gt=0, lt=1)


@dataclass(frozen=True)
class ResidualSeries:
    """Steering prediction errors of one window, in degrees.

    Attributes:
        values: Residuals e_n for n >= 3 of the window.
        source: Reference of the window the residuals came from.
    """

    values: np.ndarray
    source: str | None = None

    def __len__(self) -> int:
        return int(np.asarray(self.values).size)


@dataclass(frozen=True)
class BinDistribution:
    """Proportions of residuals in the nine entropy bins."""

    proportions: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.proportions) != 9:
            raise ValueError("exactly 9 bins required")


# --- REPORTS ---


class GroupStats(BaseModel):
    """Mean, sample standard deviation and count of one group in one cell."""

    mean: float | None = None
    sd: float | None = None
    n: int = 0


class ReportCell(BaseModel):
    """One metric x curvature x speed-bucket comparison."""

    metric: str
    curvature: str
    bucket: str
    interaction: GroupStats
    baseline: GroupStats
    d: float | None = None


class EffectSize(BaseModel):
    """Standardized effect size of one metric in one driving condition."""

    metric: str
    condition: str
    d: float
    n_interaction: int = Field(ge=2)
    n_baseline: int = Field(ge=2)


class ComparisonReport(BaseModel):
    """Grouped statistics and effect sizes, interaction minus baseline."""

    metrics: list[str]
    bucket_labels: list[str]
    cells: list[ReportCell]
    effect_sizes: list[EffectSize]
    alpha: AlphaEstimate | None = None
    config: PipelineConfig

    def cell(self, metric: str, curvature: str, bucket: str = "all") -> ReportCell:
        for c in self.cells:
            if (c.metric, c.curvature, c.bucket) == (metric, curvature, bucket):
                return c
        raise KeyError((metric, curvature, bucket))

    def effect(self, metric: str, condition: str) -> EffectSize | None:
        for e in self.effect_sizes:
            if (e.metric, e.condition) == (metric, condition):
                return e
        return None


class InputFile(BaseModel):
    """An input file and its SHA-256 content hash."""

    path: str
    sha256: str


class RunCounts(BaseModel):
    """Counts recorded by a pipeline run."""

    drives: int = 0
    rejected_lines: int = 0
    interaction_sequences: int = 0
    dropped_adas: int = 0
    baselines: int = 0
    shortfall: dict[str, int] = Field(default_factory=dict)
    metrics_interaction: int = 0
    metrics_baseline: int = 0


class RunManifest(BaseModel):
    """Reproducibility record of an extract or report run."""

    tool_version: str
    stage: str
    config: PipelineConfig
    inputs: list[InputFile] = Field(default_factory=list)
    counts: RunCounts = Field(default_factory=RunCounts)
    alpha: AlphaEstimate | None = None
    timings: dict[str, float] = Field(default_factory=dict)


# --- SYNTHETIC DRIVES ---


class RoadSegment(BaseModel):
    """Road section with a mean steering angle.

    With ``winding_period`` set the angle oscillates with amplitude
    ``curvature_angle``; ``tracking_sd`` adds curvature-tracking corrections
    that distraction does not alter.
    """

    start: float = Field(ge=0)
    end: float
    curvature_angle: float = 0.0
    winding_period: float | None = Field(default=None, gt=0)
    tracking_sd: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "RoadSegment":
        if self.end <= self.start:
            raise ValueError("segment end must follow start")
        return self


class CorrectionModel(BaseModel):
    """Intermittent steering corrections smoothed by a first-order lag."""

    interval_mean: float = Field(default=1.5, gt=0, description="seconds")
    magnitude_sd: float = Field(default=0.8, ge=0, description="degrees")
    time_constant: float = Field(default=0.5, gt=0, description="seconds")


class DistractionEpisode(BaseModel):
    """Stretch of distracted steering with a burst of synthetic taps."""

    start: float = Field(ge=0)
    end: float
    magnitude_multiplier: float = Field(default=3.0, ge=1)
    interval_multiplier: float = Field(default=2.0, ge=1)

    @model_validator(mode="after")
    def _ordered(self) -> "DistractionEpisode":
        if self.end <= self.start:
            raise ValueError("episode end must follow start")
        return self


class SpeedSegment(BaseModel):
    """Constant speed from ``start`` until the next segment."""

    start: float = Field(ge=0)
    speed: float = Field(ge=0, description="km/h")


class SynthConfig(BaseModel):
    """Parameters of one synthetic drive."""

    model_config = ConfigDict(extra="forbid")

    duration: float = Field(gt=0, description="seconds")
    rate: float = Field(default=5.0, gt=0, description="Hz")
    road_profile: list[RoadSegment] = Field(default_factory=list)
    corrections: CorrectionModel = Field(default_factory=CorrectionModel)
    noise_sd: float = Field(default=0.1, ge=0, description="White steering noise (deg)")
    episodes: list[DistractionEpisode] = Field(default_factory=list)
    speed_profile: list[SpeedSegment] = Field(
        default_factory=lambda: [SpeedSegment(start=0.0, speed=80.0)]
    )
    tap_interval: float = Field(default=3.0, gt=0, lt=10.0, description="seconds")
    min_episode_gap: float = Field(
        default=10.0, ge=0, description="Least quiet time between episodes (s)"
    )
    rng_seed: int = 0

    @model_validator(mode="after")
    def _within_duration(self) -> "SynthConfig":
        for i, episode in enumerate(self.episodes):
            if episode.end > self.duration:
                raise ValueError(f"episodes.{i} ends after the drive duration")
        ordered = sorted(self.episodes, key=lambda e: e.start)
        for a, b in zip(ordered, ordered[1:], strict=False):
            if b.start < a.end:
                raise ValueError("episodes must not overlap")
            if b.start - a.end < self.min_episode_gap - _TIME_EPS:
                raise ValueError(
                    f"episodes at {a.start:g} s and {b.start:g} s are less than "
                    f"{self.min_episode_gap:g} s apart"
                )
        if not self.speed_profile:
            raise ValueError("speed_profile needs at least one segment")
        return self


class EpisodeLayout(BaseModel):
    """Evenly spaced distraction episodes applied to every generated drive."""

    count: int = Field(ge=1)
    length: float = Field(gt=0, description="seconds")
    magnitude_multiplier: float = Field(default=3.0, ge=1)
    interval_multiplier: float = Field(default=2.0, ge=1)


class SynthCorpusConfig(BaseModel):
    """A batch of synthetic drives sharing one template."""

    model_config = ConfigDict(extra="forbid")

    n_drives: int = Field(default=1, ge=1)
    drive: SynthConfig
    episode_layout: EpisodeLayout | None = None
    rng_seed: int = 0
    drive_id_prefix: str = Field(default="drive", min_length=1)


class EpisodeLabel(BaseModel):
    """Ground-truth label of one generated distraction episode."""

    start: float
    end: float
    magnitude_multiplier: float
    interval_multiplier: float
    tap_times: list[float]


class GroundTruth(BaseModel):
    """Distraction episodes and the taps emitted for them in one drive."""

    drive_id: str
    seed: int
    episodes: list[EpisodeLabel] = Field(default_factory=list)


# --- VALIDATION ---


class Violation(BaseModel):
    """A broken drive invariant, located by index or time."""

    field: str
    rule: str
    index: int | None = None
    time: float | None = None

    def __str__(self) -> str:
        where = f" at index {self.index}" if self.index is not None else ""
        if self.time is not None:
            where += f" (t={self.time:g})"
        return f"{self.field}: {self.rule}{where}"


def _check_trace(name: str, trace: Trace, non_negative: bool) -> list[Violation]:
    violations: list[Violation] = []
    if not trace.sample_rate > 0:
        violations.append(Violation(field=f"{name}.sample_rate", rule="must be positive"))
    if len(trace) == 0:
        violations.append(Violation(field=f"{name}.values", rule="must not be empty"))
        return violations
    bad = np.flatnonzero(~np.isfinite(trace.values))
    if bad.size:
        violations.append(
            Violation(field=f"{name}.values", rule="must be finite", index=int(bad[0]))
        )
    if non_negative:
        negative = np.flatnonzero(trace.values < 0)
        if negative.size:
            violations.append(
                Violation(
                    field=f"{name}.values", rule="must be non-negative", index=int(negative[0])
                )
            )
    return violations


def validate_drive(drive: Drive) -> list[Violation]:
    """Check every drive invariant and report the violations found.

    Args:
        drive: The drive to check.

    Returns:
        One Violation per broken rule, naming the field, the rule and the
        first offending index or time. Empty when the drive is valid.
    """
    violations = _check_trace("steering", drive.steering, non_negative=False)
    violations += _check_trace("speed", drive.speed, non_negative=True)
    if not drive.drive_id:
        violations.append(Violation(field="drive_id", rule="must not be empty"))

    start, end = drive.span
    tolerance = 0.5 * drive.steering.period if drive.steering.sample_rate > 0 else 0.0
    if len(drive.speed) and len(drive.steering) and (
        drive.speed.start_time > start + tolerance or drive.speed.end_time < end - tolerance
    ):
        violations.append(
            Violation(field="speed", rule="must cover the steering span", time=start)
        )

    for i, event in enumerate(drive.ui_events):
        if i and event.time < drive.ui_events[i - 1].time:
            violations.append(
                Violation(field="ui_events", rule="must be sorted by time", index=i, time=event.time)
            )
            break
    for i, event in enumerate(drive.ui_events):
        if not start <= event.time <= end:
            violations.append(
                Violation(
                    field="ui_events.time", rule="must lie within the drive span", index=i, time=event.time
                )
            )
            break
    for i, event in enumerate(drive.ui_events):
        if not event.element_id:
            violations.append(
                Violation(field="ui_events.element_id", rule="must not be empty", index=i)
            )
            break

    for i, interval in enumerate(drive.adas):
        if not interval.start < interval.end:
            violations.append(
                Violation(field="adas", rule="start must precede end", index=i, time=interval.start)
            )
            break
    for feature in AdasFeature:
        spans = sorted((a for a in drive.adas if a.feature is feature), key=lambda a: a.start)
        for a, b in zip(spans, spans[1:], strict=False):
            if b.start <= a.end:
                violations.append(
                    Violation(
                        field=f"adas.{feature.value}", rule="intervals must not overlap", time=b.start
                    )
                )
                break
    return violations


def validate_corpus(drives: list[Drive]) -> list[Violation]:
    """Report drive ids that occur more than once in a corpus."""
    seen: set[str] = set()
    violations: list[Violation] = []
    for i, drive in enumerate(drives):
        if drive.drive_id in seen:
            violations.append(Violation(field="drive_id", rule="must be unique", index=i))
        seen.add(drive.drive_id)
    return violations
