"""Steering metric kernels.

Windowing on the uniform sample grid, zero-phase low-pass filtering,
steering-angle prediction residuals, alpha estimation, steering entropy and
steering wheel reversal rates, plus the per-sequence metric record that
combines them.
"""

import logging
import math
from collections import Counter

import numpy as np
from scipy import signal

from exceptions import (
    DegenerateBaselineError,
    EmptyWindowError,
    InvalidAlphaError,
    InvalidConfigError,
    InvalidCutoffError,
    MissingInputError,
    TooShortError,
    WindowTooShortError,
)
from models import (
    AlphaEstimate,
    BinDistribution,
    Drive,
    PipelineConfig,
    PredictorKind,
    ResidualSeries,
    Sequence,
    SequenceMetrics,
    Trace,
)

__all__ = [
    "ENTROPY_BINS",
    "window_indices",
    "window_samples",
    "taylor_residuals",
    "sequence_residuals",
    "estimate_alpha",
    "steering_entropy",
    "lowpass",
    "count_reversals",
    "swrr",
    "compute_sequence_metrics",
]

logger = logging.getLogger(__name__)

ENTROPY_BINS = 9

# Magnitude bin edges in units of alpha; the outer bins are unbounded
_EDGE_MULTIPLES = np.array([0.5, 1.0, 2.5, 5.0])

_GRID_EPS = 1e-9

_MIN_SAMPLES = 4


def window_indices(trace: Trace, start: float, end: float) -> tuple[int, int]:
    """
    Half-open index range of the samples with ``start <= t_i <= end``.

    Raises:
        EmptyWindowError: If no grid point falls inside the window.
    """
    rate = trace.sample_rate
    i0 = max(math.ceil((start - trace.start_time) * rate - _GRID_EPS), 0)
    i1 = min(math.floor((end - trace.start_time) * rate + _GRID_EPS), len(trace) - 1)
    if i1 < i0:
        raise EmptyWindowError(start, end)
    return i0, i1 + 1


def window_samples(trace: Trace, start: float, end: float) -> np.ndarray:
    """Samples of ``trace`` inside the closed window, by index arithmetic."""
    i0, i1 = window_indices(trace, start, end)
    return trace.values[i0:i1]


def taylor_residuals(
    theta: np.ndarray | list[float],
    predictor: PredictorKind = PredictorKind.TAYLOR,
) -> ResidualSeries:
    """
    Prediction errors of a steering-angle series.

    Each angle from the fourth on is predicted from the three before it. The
    ``taylor`` predictor is the second-order Taylor extrapolation
    ``t1 + (t1 - t2) + 0.5 * ((t1 - t2) - (t2 - t3))``; the ``quadratic``
    predictor ``3*t1 - 3*t2 + t3`` is exact on every quadratic sequence.

    Args:
        theta: Steering angles in degrees.
        predictor: Which predictor to apply.

    Returns:
        Residuals ``theta_n - prediction_n`` for n >= 3.

    Raises:
        TooShortError: If fewer than four angles are given.
    """
    x = np.asarray(theta, dtype=np.float64)
    if x.size < _MIN_SAMPLES:
        raise TooShortError(int(x.size), _MIN_SAMPLES)
    t1, t2, t3 = x[2:-1], x[1:-2], x[:-3]
    if predictor is PredictorKind.QUADRATIC:
        predicted = 3.0 * t1 - 3.0 * t2 + t3
    else:
        slope = t1 - t2
        predicted = t1 + slope + 0.5 * (slope - (t2 - t3))
    return ResidualSeries(values=x[3:] - predicted)


def sequence_residuals(drive: Drive, sequence: Sequence, cfg: PipelineConfig) -> ResidualSeries:
    """Residuals of the steering window of one sequence."""
    try:
        theta = window_samples(drive.steering, sequence.window_start, sequence.window_end)
    except EmptyWindowError as e:
        raise WindowTooShortError(drive.drive_id, 0) from e
    if theta.size < _MIN_SAMPLES:
        raise WindowTooShortError(drive.drive_id, int(theta.size))
    residuals = taylor_residuals(theta, cfg.predictor)
    return ResidualSeries(
        values=residuals.values,
        source=f"{drive.drive_id}@{sequence.window_start:g}",
    )


def estimate_alpha(baseline_residuals: list[ResidualSeries], percentile: float) -> AlphaEstimate:
    """
    Average the per-sequence percentile of absolute residuals.

    Each series contributes the ``percentile`` quantile of ``|e|`` (linear
    interpolation between order statistics); alpha is their arithmetic mean.

    Raises:
        MissingInputError: If every series is empty.
        DegenerateBaselineError: If alpha comes out as zero.
    """
    per_sequence = [
        float(np.quantile(np.abs(r.values), percentile))
        for r in baseline_residuals
        if len(r)
    ]
    if not per_sequence:
        raise MissingInputError("No baseline residuals to estimate alpha from")
    alpha = float(np.mean(per_sequence))
    if not alpha > 0:
        raise DegenerateBaselineError()
    logger.info(
        "Alpha %.6g from %d baseline sequence(s) at percentile %.2f",
        alpha,
        len(per_sequence),
        percentile,
    )
    return AlphaEstimate(
        alpha=alpha, n_baseline_sequences=len(per_sequence), percentile_used=percentile
    )


def steering_entropy(
    residuals: ResidualSeries,
    alpha: AlphaEstimate | float,
) -> tuple[float, BinDistribution]:
    """
    Normalized entropy of residuals binned in multiples of alpha.

    Nine bins split at +/-0.5, 1, 2.5 and 5 alpha, with unbounded outer bins.
    A residual on an edge falls in the inner bin. Entropy uses log base 9,
    so the result lies in [0, 1].

    Raises:
        InvalidAlphaError: If alpha is not a positive finite number.
        TooShortError: If there are no residuals.
    """
    a = alpha.alpha if isinstance(alpha, AlphaEstimate) else float(alpha)
    if not (math.isfinite(a) and a > 0):
        raise InvalidAlphaError(a)
    e = np.asarray(residuals.values, dtype=np.float64)
    if e.size == 0:
        raise TooShortError(0, 1)

    magnitude = np.searchsorted(_EDGE_MULTIPLES * a, np.abs(e), side="left")
    index = 4 + np.sign(e).astype(np.int64) * magnitude
    counts = np.bincount(index, minlength=ENTROPY_BINS)
    p = counts / e.size
    nonzero = p[p > 0]
    h = float(-np.sum(nonzero * np.log(nonzero)) / np.log(ENTROPY_BINS))
    return min(1.0, max(0.0, h)), BinDistribution(tuple(float(x) for x in p))


def lowpass(
    theta: np.ndarray | list[float],
    rate: float,
    cutoff: float,
    order: int = 2,
) -> np.ndarray:
    """
    Zero-phase Butterworth low-pass filter.

    The filter runs forward and backward, so the output has no phase lag
    and the same length as the input.

    Raises:
        InvalidCutoffError: Unless ``0 < cutoff < rate / 2``.
    """
    if not 0 < cutoff < rate / 2:
        raise InvalidCutoffError(cutoff, rate)
    x = np.asarray(theta, dtype=np.float64)
    if x.size < 2:
        return x.copy()
    b, a = signal.butter(order, cutoff, btype="low", fs=rate)
    padlen = min(3 * max(len(a), len(b)), x.size - 1)
    return np.asarray(signal.filtfilt(b, a, x, padlen=padlen))


def _stationary_values(x: np.ndarray) -> np.ndarray:
    """Values at interior local extrema; plateaus count once."""
    d = np.diff(x)
    moving = np.flatnonzero(d != 0)
    if moving.size < 2:
        return np.empty(0)
    direction = np.sign(d[moving])
    turns = np.flatnonzero(direction[1:] != direction[:-1])
    return x[moving[turns] + 1]


def count_reversals(theta: np.ndarray | list[float], gap: float) -> int:
    """
    Count steering reversals of at least ``gap`` degrees.

    Extrema are scanned in time order. Until the first reversal, the lowest
    and highest extrema seen so far are tracked; afterwards a swing in the
    current direction moves the running extreme, and a retrace of at least
    ``gap`` from it counts one reversal and flips the direction.
    """
    values = _stationary_values(np.asarray(theta, dtype=np.float64)).tolist()
    if len(values) < 2:
        return 0

    count = 0
    direction = 0
    low = high = extreme = values[0]
    for v in values[1:]:
        if direction == 0:
            if v - low >= gap:
                count, direction, extreme = 1, 1, v
            elif high - v >= gap:
                count, direction, extreme = 1, -1, v
            else:
                low, high = min(low, v), max(high, v)
        elif direction > 0:
            if v > extreme:
                extreme = v
            elif extreme - v >= gap:
                count, direction, extreme = count + 1, -1, v
        else:
            if v < extreme:
                extreme = v
            elif v - extreme >= gap:
                count, direction, extreme = count + 1, 1, v
    return count


def swrr(
    theta_filtered: np.ndarray | list[float],
    rate: float,
    gap: float,
    duration: float | None = None,
) -> float:
    """
    Steering wheel reversals per minute.

    Args:
        theta_filtered: Steering angles, usually low-pass filtered.
        rate: Sample rate in Hz; sets the duration when none is given.
        gap: Minimum reversal size in degrees.
        duration: Window length in seconds.

    Raises:
        InvalidConfigError: If gap or duration is not positive.
    """
    if gap <= 0:
        raise InvalidConfigError("must be positive", field="gap")
    if duration is None:
        duration = len(theta_filtered) / rate
    if duration <= 0:
        raise InvalidConfigError("must be positive", field="duration")
    return count_reversals(theta_filtered, gap) / (duration / 60.0)


def compute_sequence_metrics(
    drive: Drive,
    sequence: Sequence,
    alpha: AlphaEstimate,
    cfg: PipelineConfig,
) -> SequenceMetrics:
    """
    Compute the steering metrics and window statistics of one sequence.

    Args:
        drive: Drive the sequence was taken from.
        sequence: Interaction or baseline sequence.
        alpha: Entropy normalization from the baselines.
        cfg: Pipeline configuration.

    Returns:
        The SequenceMetrics record.

    Raises:
        WindowTooShortError: If the window holds fewer than four samples.
    """
    from stats_report import classify_curvature

    rate = drive.steering.sample_rate
    try:
        theta = window_samples(drive.steering, sequence.window_start, sequence.window_end)
        speed = window_samples(drive.speed, sequence.window_start, sequence.window_end)
    except EmptyWindowError as e:
        raise WindowTooShortError(drive.drive_id, 0) from e
    if theta.size < _MIN_SAMPLES or sequence.duration <= 0:
        raise WindowTooShortError(drive.drive_id, int(theta.size))

    entropy, _ = steering_entropy(taylor_residuals(theta, cfg.predictor), alpha)
    filtered = lowpass(theta, rate, cfg.lowpass_cutoff, cfg.lowpass_order)
    reversal_input = filtered if cfg.swrr_prefilter else theta
    rates = {
        f"{gap:g}": swrr(reversal_input, rate, gap, sequence.duration) for gap in cfg.swrr_gaps
    }

    gestures = Counter(e.gesture.value for e in sequence.events)
    n = sequence.n_events
    return SequenceMetrics(
        drive_id=sequence.drive_id,
        kind=sequence.kind,
        window_start=sequence.window_start,
        window_end=sequence.window_end,
        clipped=sequence.clipped,
        steering_entropy=entropy,
        swrr=rates,
        mean_speed=float(np.mean(speed)),
        speed_sd=float(np.std(speed)),
        steering_sd=float(np.std(theta)),
        steering_abs_mean=float(np.mean(np.abs(theta))),
        duration=sequence.duration,
        curvature=classify_curvature(filtered, cfg, rate=rate, filtered=True),
        n_interactions=n,
        interaction_density=n / max(sequence.core_duration, 1.0 / rate),
        n_elements=len({e.element_id for e in sequence.events}),
        gesture_counts=dict(sorted(gestures.items())),
    )
