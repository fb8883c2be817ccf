"""Drive-log ingestion.

Parses JSONL or CSV drive logs into raw records, regularizes steering and
speed onto a uniform grid, turns on-change ADAS flags into intervals and
assembles validated Drive values. The reverse direction (Drive to log) lives
here too so generated drives travel through the same file format.
"""

import csv
import io
import json
import logging
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Any, BinaryIO, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from exceptions import EmptyDriveError, UnknownFormatError, UnreadableSourceError
from models import (
    AdasFeature,
    AdasInterval,
    Drive,
    Gesture,
    LogFormat,
    ParsedLog,
    RawRecord,
    RecordKind,
    RejectedLine,
    SpeedTrace,
    SteeringTrace,
    Trace,
    UIEvent,
    validate_drive,
)

__all__ = [
    "CSV_COLUMNS",
    "IngestedFile",
    "read_drive_log",
    "regularize_trace",
    "normalize_adas",
    "assemble_drive",
    "drive_to_records",
    "write_drive_log",
    "ingest_file",
]

logger = logging.getLogger(__name__)

CSV_COLUMNS: tuple[str, ...] = ("t", "kind", "value", "feature", "active", "element", "gesture")

# Tolerance for grid-point arithmetic on float timestamps
_GRID_EPS = 1e-9


# --- LINE SCHEMAS ---


class _Line(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    t: float


class _SteerLine(_Line):
    kind: Literal["steer"]
    value: float

    def to_record(self) -> RawRecord:
        return RawRecord(t=self.t, kind=RecordKind.STEER, value=self.value)


class _SpeedLine(_Line):
    kind: Literal["speed"]
    value: float = Field(ge=0)

    def to_record(self) -> RawRecord:
        return RawRecord(t=self.t, kind=RecordKind.SPEED, value=self.value)


class _AdasLine(_Line):
    kind: Literal["adas"]
    feature: AdasFeature
    active: bool

    def to_record(self) -> RawRecord:
        return RawRecord(t=self.t, kind=RecordKind.ADAS, feature=self.feature, active=self.active)


class _UILine(_Line):
    kind: Literal["ui"]
    element: str = Field(min_length=1)
    gesture: Gesture

    def to_record(self) -> RawRecord:
        return RawRecord(t=self.t, kind=RecordKind.UI, element=self.element, gesture=self.gesture)


_LineUnion = Annotated[
    _SteerLine | _SpeedLine | _AdasLine | _UILine, Field(discriminator="kind")
]
_LINE_ADAPTER: TypeAdapter[_SteerLine | _SpeedLine | _AdasLine | _UILine] = TypeAdapter(
    _LineUnion
)


def _reason(error: ValidationError) -> str:
    first = error.errors()[0]
    loc = ".".join(str(part) for part in first["loc"])
    return f"{loc}: {first['msg']}" if loc else first["msg"]


# Steering and speed lines make up nearly every line of a log
_SAMPLE_KINDS = {"steer": RecordKind.STEER, "speed": RecordKind.SPEED}
_SAMPLE_KEYS = frozenset(("t", "kind", "value"))


def _finite(x: Any) -> float | None:
    if type(x) is str and "_" in x:
        return None
    if type(x) is float or type(x) is int or type(x) is str:
        try:
            v = float(x)
        except (ValueError, OverflowError):
            return None
        return v if math.isfinite(v) else None
    return None


def _sample_record(payload: Any) -> RawRecord | None:
    """
    Build a steer or speed record from a well-formed plain line.

    Returns None for anything else, leaving it to the line schemas.
    """
    if not isinstance(payload, dict) or payload.keys() != _SAMPLE_KEYS:
        return None
    kind = _SAMPLE_KINDS.get(payload["kind"]) if type(payload["kind"]) is str else None
    if kind is None:
        return None
    t, value = _finite(payload["t"]), _finite(payload["value"])
    if t is None or value is None or (kind is RecordKind.SPEED and value < 0):
        return None
    return RawRecord(t=t, kind=kind, value=value)


# --- READING ---


def _iter_jsonl(text: Iterable[str]) -> Iterator[tuple[int, str, dict[str, Any] | str]]:
    for line_no, line in enumerate(text, start=1):
        stripped = line.strip()
        if stripped:
            yield line_no, stripped, stripped


def _iter_csv(text: io.TextIOBase) -> Iterator[tuple[int, str, dict[str, Any] | str]]:
    reader = csv.reader(text)
    header = next(reader, None)
    if header is None:
        return
    if tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise UnreadableSourceError(
            f"CSV header must be {','.join(CSV_COLUMNS)}, got {','.join(header)}"
        )
    for row in reader:
        line_no = reader.line_num
        if not any(cell.strip() for cell in row):
            continue
        raw = ",".join(row)
        if len(row) != len(CSV_COLUMNS):
            yield line_no, raw, f"expected {len(CSV_COLUMNS)} columns, got {len(row)}"
            continue
        cells = {k: v.strip() for k, v in zip(CSV_COLUMNS, row, strict=True) if v.strip()}
        yield line_no, raw, cells


def read_drive_log(source: BinaryIO, format: LogFormat | str) -> ParsedLog:
    """
    Parse a drive log into raw records.

    Malformed lines never abort parsing; they are collected as rejects with
    their 1-based line number and the reason.

    Args:
        source: Byte stream holding UTF-8 text.
        format: ``jsonl`` or ``csv``.

    Returns:
        ParsedLog with one record per well-formed line, in file order.

    Raises:
        UnknownFormatError: If the format is neither jsonl nor csv.
        UnreadableSourceError: If the stream cannot be read or decoded.
    """
    try:
        fmt = LogFormat(format)
    except ValueError as e:
        raise UnknownFormatError(str(format)) from e

    parsed = ParsedLog()
    text = io.TextIOWrapper(source, encoding="utf-8", newline="" if fmt is LogFormat.CSV else None)
    try:
        lines = _iter_jsonl(text) if fmt is LogFormat.JSONL else _iter_csv(text)
        for line_no, raw, payload in lines:
            if isinstance(payload, str) and fmt is LogFormat.CSV:
                parsed.rejects.append(RejectedLine(line_no, payload, raw))
                continue
            if isinstance(payload, str):
                try:
                    record = _sample_record(json.loads(payload))
                except ValueError:
                    record = None
            else:
                record = _sample_record(payload)
            if record is None:
                try:
                    if isinstance(payload, str):
                        line = _LINE_ADAPTER.validate_json(payload)
                    else:
                        line = _LINE_ADAPTER.validate_python(payload)
                except ValidationError as e:
                    parsed.rejects.append(RejectedLine(line_no, _reason(e), raw))
                    continue
                record = line.to_record()
            parsed.records.append(record)
    except UnicodeDecodeError as e:
        raise UnreadableSourceError(f"Source is not valid UTF-8: {e.reason}") from e
    except (OSError, csv.Error) as e:
        raise UnreadableSourceError(f"Failed to read source: {e}") from e
    finally:
        text.detach()

    if parsed.rejects:
        logger.warning(
            "Rejected %d malformed line(s), first at line %d: %s",
            len(parsed.rejects),
            parsed.rejects[0].line_no,
            parsed.rejects[0].reason,
        )
    return parsed


# --- REGULARIZATION ---


def _dedupe_last(times: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Keep the last value recorded at each timestamp."""
    rev_times = times[::-1]
    unique, first_in_rev = np.unique(rev_times, return_index=True)
    return unique, values[::-1][first_in_rev]


def regularize_trace(
    times: np.ndarray | list[float],
    values: np.ndarray | list[float],
    nominal_rate: float = 5.0,
    max_gap: float = 1.0,
) -> list[Trace]:
    """
    Resample time-stamped samples onto uniform grid segments.

    Each segment starts at its first record and holds grid points
    ``start + i / nominal_rate`` up to its last record; values are linearly
    interpolated. Consecutive records more than ``max_gap`` apart start a new
    segment instead of being bridged. Repeated timestamps keep the last value.

    Args:
        times: Record times in seconds, sorted ascending.
        values: Record values.
        nominal_rate: Grid rate in Hz.
        max_gap: Largest record spacing bridged by interpolation, in seconds.

    Returns:
        Trace segments in time order; empty for empty input.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.size == 0:
        return []
    t, v = _dedupe_last(t, v)

    breaks = np.flatnonzero(np.diff(t) > max_gap) + 1
    segments: list[Trace] = []
    for seg_t, seg_v in zip(np.split(t, breaks), np.split(v, breaks), strict=True):
        start = float(seg_t[0])
        n = int(np.floor((seg_t[-1] - start) * nominal_rate + _GRID_EPS)) + 1
        grid = start + np.arange(n) / nominal_rate
        segments.append(Trace(start, nominal_rate, np.interp(grid, seg_t, seg_v)))
    return segments


def _coverage(grid: np.ndarray, times: np.ndarray, max_gap: float) -> np.ndarray:
    """Mask of grid points bracketed by records at most ``max_gap`` apart."""
    j = np.searchsorted(times, grid, side="right") - 1
    exact = (j >= 0) & (times[np.clip(j, 0, times.size - 1)] == grid)
    if times.size < 2:
        return exact
    inside = (j >= 0) & (j < times.size - 1)
    jj = np.clip(j, 0, times.size - 2)
    return exact | (inside & (times[jj + 1] - times[jj] <= max_gap))


def _longest_run(mask: np.ndarray) -> tuple[int, int] | None:
    """Half-open index range of the longest run of True values."""
    if not mask.any():
        return None
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    starts, ends = edges[::2], edges[1::2]
    best = int(np.argmax(ends - starts))
    return int(starts[best]), int(ends[best])


# --- ADAS ---


def normalize_adas(records: list[RawRecord], drive_span: tuple[float, float]) -> list[AdasInterval]:
    """
    Turn on-change ADAS flags into closed intervals per feature.

    Repeated activations are ignored while a feature is active, an activation
    without a later deactivation runs to the drive end, and touching or
    overlapping intervals of one feature are merged. Intervals are clipped
    to ``drive_span``; empty ones are dropped.

    Args:
        records: ADAS records sorted by time.
        drive_span: (start, end) of the drive.

    Returns:
        Intervals sorted by start time.
    """
    span_start, span_end = drive_span
    intervals: list[AdasInterval] = []
    for feature in AdasFeature:
        raw: list[tuple[float, float]] = []
        since: float | None = None
        for record in records:
            if record.kind is not RecordKind.ADAS or record.feature is not feature:
                continue
            if record.active and since is None:
                since = record.t
            elif not record.active and since is not None:
                raw.append((since, record.t))
                since = None
        if since is not None:
            raw.append((since, span_end))

        merged: list[list[float]] = []
        for start, end in raw:
            start, end = max(start, span_start), min(end, span_end)
            if start >= end:
                continue
            if merged and start <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], end)
            else:
                merged.append([start, end])
        intervals.extend(AdasInterval(start=s, end=e, feature=feature) for s, e in merged)

    intervals.sort(key=lambda a: (a.start, a.feature.value))
    return intervals


# --- ASSEMBLY ---


def _series(records: list[RawRecord], kind: RecordKind) -> tuple[np.ndarray, np.ndarray]:
    times = [r.t for r in records if r.kind is kind]
    values = [r.value for r in records if r.kind is kind]
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(t, kind="stable")
    return t[order], v[order]


def assemble_drive(
    records: list[RawRecord],
    drive_id: str,
    nominal_rate: float = 5.0,
    max_gap: float = 1.0,
) -> list[Drive]:
    """
    Build drives from the raw records of one log.

    Steering is regularized first; every steering segment becomes its own
    Drive, with ``-1``, ``-2`` ... appended to the id when there is more than
    one. Speed is interpolated onto each steering grid and the segment is
    trimmed to the longest stretch speed covers. UI events and ADAS
    intervals are assigned to the segment whose span holds them.

    Args:
        records: Parsed records of one drive log.
        drive_id: Identifier of the log.
        nominal_rate: Grid rate in Hz.
        max_gap: Largest record spacing bridged by interpolation.

    Returns:
        One valid Drive per contiguous steering segment.

    Raises:
        EmptyDriveError: If no steering samples survive.
    """
    steer_t, steer_v = _series(records, RecordKind.STEER)
    speed_t, speed_v = _series(records, RecordKind.SPEED)
    if speed_t.size:
        speed_t, speed_v = _dedupe_last(speed_t, speed_v)

    segments: list[Trace] = []
    for segment in regularize_trace(steer_t, steer_v, nominal_rate, max_gap):
        if speed_t.size == 0:
            break
        grid = segment.timestamps()
        run = _longest_run(_coverage(grid, speed_t, max_gap))
        if run is None:
            logger.warning(
                "Drive %s: steering segment at t=%.3f has no speed coverage, dropped",
                drive_id,
                segment.start_time,
            )
            continue
        i0, i1 = run
        if (i0, i1) != (0, len(segment)):
            logger.warning(
                "Drive %s: steering segment trimmed to speed coverage [%.3f, %.3f]",
                drive_id,
                segment.time_at(i0),
                segment.time_at(i1 - 1),
            )
            segment = Trace(segment.time_at(i0), nominal_rate, segment.values[i0:i1])
        segments.append(segment)

    if not segments:
        raise EmptyDriveError(drive_id)
    if len(segments) > 1:
        logger.warning("Drive %s split into %d contiguous drives", drive_id, len(segments))

    adas_records = sorted(
        (r for r in records if r.kind is RecordKind.ADAS), key=lambda r: r.t
    )
    events = sorted(
        (
            UIEvent(time=r.t, element_id=r.element or "", gesture=r.gesture or Gesture.OTHER)
            for r in records
            if r.kind is RecordKind.UI
        ),
        key=lambda e: e.time,
    )

    drives: list[Drive] = []
    for k, segment in enumerate(segments, start=1):
        start, end = segment.start_time, segment.end_time
        grid = segment.timestamps()
        drive = Drive(
            drive_id=drive_id if len(segments) == 1 else f"{drive_id}-{k}",
            steering=SteeringTrace(start, nominal_rate, segment.values),
            speed=SpeedTrace(start, nominal_rate, np.interp(grid, speed_t, speed_v)),
            ui_events=tuple(e for e in events if start <= e.time <= end),
            adas=tuple(normalize_adas(adas_records, (start, end))),
        )
        violations = validate_drive(drive)
        if violations:
            logger.warning(
                "Drive %s dropped: %s", drive.drive_id, "; ".join(str(v) for v in violations)
            )
            continue
        drives.append(drive)

    dropped_events = len(events) - sum(len(d.ui_events) for d in drives)
    if dropped_events:
        logger.debug("Drive %s: %d UI event(s) outside steering coverage", drive_id, dropped_events)
    if not drives:
        raise EmptyDriveError(drive_id)
    return drives


# --- SERIALIZATION ---


def drive_to_records(drive: Drive) -> list[RawRecord]:
    """
    Flatten a Drive into raw records sorted by time.

    Grid samples are emitted at ``start_time + i / sample_rate``, so
    re-ingesting the records reproduces the grid values exactly.
    """
    records: list[RawRecord] = []
    steer_times = drive.steering.timestamps()
    speed_times = drive.speed.timestamps()
    for t, v in zip(steer_times.tolist(), drive.steering.values.tolist(), strict=True):
        records.append(RawRecord(t=t, kind=RecordKind.STEER, value=v))
    for t, v in zip(speed_times.tolist(), drive.speed.values.tolist(), strict=True):
        records.append(RawRecord(t=t, kind=RecordKind.SPEED, value=v))
    for interval in drive.adas:
        records.append(
            RawRecord(t=interval.start, kind=RecordKind.ADAS, feature=interval.feature, active=True)
        )
        records.append(
            RawRecord(t=interval.end, kind=RecordKind.ADAS, feature=interval.feature, active=False)
        )
    for event in drive.ui_events:
        records.append(
            RawRecord(t=event.time, kind=RecordKind.UI, element=event.element_id, gesture=event.gesture)
        )
    records.sort(key=lambda r: r.t)
    return records


def _record_fields(record: RawRecord) -> dict[str, Any]:
    fields: dict[str, Any] = {"t": record.t, "kind": record.kind.value}
    if record.kind in (RecordKind.STEER, RecordKind.SPEED):
        fields["value"] = record.value
    elif record.kind is RecordKind.ADAS:
        assert record.feature is not None
        fields["feature"] = record.feature.value
        fields["active"] = record.active
    else:
        assert record.gesture is not None
        fields["element"] = record.element
        fields["gesture"] = record.gesture.value
    return fields


def write_drive_log(drive: Drive, path: Path, format: LogFormat | str = LogFormat.JSONL) -> None:
    """
    Serialize a Drive as a drive log.

    Raises:
        UnknownFormatError: If the format is neither jsonl nor csv.
        UnreadableSourceError: If the file cannot be written.
    """
    try:
        fmt = LogFormat(format)
    except ValueError as e:
        raise UnknownFormatError(str(format)) from e

    records = drive_to_records(drive)
    try:
        with path.open("w", encoding="utf-8", newline="") as f:
            if fmt is LogFormat.JSONL:
                for record in records:
                    f.write(json.dumps(_record_fields(record)))
                    f.write("\n")
            else:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                for record in records:
                    fields = _record_fields(record)
                    if "active" in fields:
                        fields["active"] = "true" if fields["active"] else "false"
                    writer.writerow([fields.get(col, "") for col in CSV_COLUMNS])
    except OSError as e:
        raise UnreadableSourceError(f"Failed to write {path}: {e}", path=str(path)) from e
    logger.debug("Wrote %d records of drive %s to %s", len(records), drive.drive_id, path)


@dataclass
class IngestedFile:
    """Drives and rejected lines read from one log file."""

    path: Path
    drives: list[Drive] = field(default_factory=list)
    rejects: list[RejectedLine] = field(default_factory=list)


def ingest_file(
    path: Path,
    format: LogFormat | str | None = None,
    nominal_rate: float = 5.0,
    max_gap: float = 1.0,
) -> IngestedFile:
    """
    Read and assemble one drive log; the drive id is the file stem.

    Args:
        path: Log file.
        format: Log format; inferred from the suffix when omitted.
        nominal_rate: Grid rate in Hz.
        max_gap: Largest record spacing bridged by interpolation.

    Raises:
        UnknownFormatError: If the format cannot be determined.
        UnreadableSourceError: If the file cannot be read.
        EmptyDriveError: If the log holds no usable steering samples.
    """
    if format is None:
        format = path.suffix.lstrip(".").lower()
    try:
        with path.open("rb") as f:
            parsed = read_drive_log(f, format)
    except OSError as e:
        raise UnreadableSourceError(f"Failed to open {path}: {e}", path=str(path)) from e

    drives = assemble_drive(parsed.records, path.stem, nominal_rate, max_gap)
    logger.debug("Ingested %s: %d drive(s), %d reject(s)", path, len(drives), len(parsed.rejects))
    return IngestedFile(path=path, drives=drives, rejects=parsed.rejects)
