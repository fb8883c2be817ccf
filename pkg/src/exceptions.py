"""Custom exceptions for the steermetrics pipeline.

This module defines a hierarchy of exceptions for the error conditions raised
while ingesting drive logs, extracting sequences, computing steering metrics
and building reports. Every exception carries the process exit code the CLI
uses when the error reaches it.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from models import Sequence

__all__ = [
    "SteerMetricsError",
    "DataError",
    "ConfigError",
    "UnreadableSourceError",
    "UnknownFormatError",
    "EmptyDriveError",
    "EmptyWindowError",
    "TooShortError",
    "WindowTooShortError",
    "InsufficientEligibleDataError",
    "DegenerateBaselineError",
    "InvalidAlphaError",
    "InvalidCutoffError",
    "ZeroVarianceError",
    "InvalidConfigError",
    "MissingInputError",
]

EXIT_DATA = 1
EXIT_CONFIG = 2


class SteerMetricsError(Exception):
    """Base exception for all steermetrics errors.

    All pipeline-specific exceptions inherit from this class, making it
    easy to catch every pipeline error with a single except clause.

    Attributes:
        message: Human-readable error description.
        exit_code: Process exit status the CLI reports for this error.
    """

    def __init__(self, message: str, exit_code: int = EXIT_DATA) -> None:
        """
        Initialize a steermetrics error.

        Args:
            message: Human-readable error description.
            exit_code: Process exit status for the CLI.
        """
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code

    def __str__(self) -> str:
        """Return string representation of the error."""
        return f"[exit {self.exit_code}] {self.message}"


class DataError(SteerMetricsError):
    """Input data is unreadable, empty or insufficient (exit 1)."""

    def __init__(self, message: str) -> None:
        super().__init__(message, exit_code=EXIT_DATA)


class ConfigError(SteerMetricsError):
    """Configuration or parameter validation failed (exit 2)."""

    def __init__(self, message: str) -> None:
        super().__init__(message, exit_code=EXIT_CONFIG)


class UnreadableSourceError(DataError):
    """A drive log or sequence file could not be read.

    Attributes:
        path: The path that failed, if known.
    """

    def __init__(self, message: str = "Source unreadable", path: str | None = None) -> None:
        super().__init__(message)
        self.path = path


class UnknownFormatError(ConfigError):
    """A log format other than jsonl or csv was requested.

    Attributes:
        format: The rejected format name.
    """

    def __init__(self, format: str) -> None:
        super().__init__(f"Unknown log format '{format}' (expected jsonl or csv)")
        self.format = format


class EmptyDriveError(DataError):
    """No steering samples survived ingestion for a drive.

    Attributes:
        drive_id: Identifier of the empty drive.
    """

    def __init__(self, drive_id: str) -> None:
        super().__init__(f"Drive '{drive_id}' has no usable steering samples")
        self.drive_id = drive_id


class EmptyWindowError(DataError):
    """A time window contains no grid sample.

    Attributes:
        start: Window start in seconds.
        end: Window end in seconds.
    """

    def __init__(self, start: float, end: float) -> None:
        super().__init__(f"Window [{start:.3f}, {end:.3f}] holds no samples")
        self.start = start
        self.end = end


class TooShortError(DataError):
    """A series is shorter than an operation requires.

    Attributes:
        length: Actual number of samples.
        required: Minimum number of samples.
    """

    def __init__(self, length: int, required: int) -> None:
        super().__init__(f"Series of {length} samples, at least {required} required")
        self.length = length
        self.required = required


class WindowTooShortError(DataError):
    """A sequence window holds fewer steering samples than the metrics need.

    Attributes:
        drive_id: Drive the sequence belongs to.
        n_samples: Samples found in the window.
    """

    def __init__(self, drive_id: str, n_samples: int) -> None:
        super().__init__(
            f"Sequence window in drive '{drive_id}' holds {n_samples} steering "
            "samples, at least 4 required"
        )
        self.drive_id = drive_id
        self.n_samples = n_samples


class InsufficientEligibleDataError(DataError):
    """Baseline sampling could not meet the target of one or more duration bins.

    The partial sample is attached so callers can continue with it.

    Attributes:
        shortfall: Missing baseline count per duration-bin index.
        partial: The baselines that could be sampled.
    """

    def __init__(self, shortfall: dict[int, int], partial: list[Sequence]) -> None:
        missing = sum(shortfall.values())
        super().__init__(
            f"Baseline sampling short by {missing} sequences in "
            f"{len(shortfall)} duration bin(s)"
        )
        self.shortfall = shortfall
        self.partial = partial


class DegenerateBaselineError(ConfigError):
    """All baseline prediction errors are zero, so alpha would be zero.

    Signals a synthetic noiseless or corrupt baseline set.
    """

    def __init__(self, message: str = "Baseline residuals are all zero; alpha undefined") -> None:
        super().__init__(message)


class InvalidAlphaError(ConfigError):
    """Steering entropy was requested with a non-positive alpha."""

    def __init__(self, alpha: float) -> None:
        super().__init__(f"Alpha must be positive, got {alpha!r}")
        self.alpha = alpha


class InvalidCutoffError(ConfigError):
    """Low-pass cutoff outside (0, rate / 2)."""

    def __init__(self, cutoff: float, rate: float) -> None:
        super().__init__(
            f"Cutoff {cutoff!r} Hz must lie strictly between 0 and {rate / 2!r} Hz"
        )
        self.cutoff = cutoff
        self.rate = rate


class ZeroVarianceError(DataError):
    """Pooled standard deviation is zero, so Cohen's d is undefined."""

    def __init__(self, message: str = "Pooled standard deviation is zero") -> None:
        super().__init__(message)


class InvalidConfigError(ConfigError):
    """A configuration file or value failed validation.

    Attributes:
        field: Dotted path of the offending field, if known.
    """

    def __init__(self, message: str, field: str | None = None) -> None:
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class MissingInputError(DataError):
    """A required input (drive logs, sequence files) is absent or empty."""

    def __init__(self, message: str) -> None:
        super().__init__(message)
