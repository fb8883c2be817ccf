"""Seeded synthetic drive generator.

Steering is the first-order smoothed sum of the road's mean angle and held
correction values that change at exponential inter-arrival times, plus a
white noise floor. Distraction episodes make corrections rarer and larger and
emit tap bursts spanning the episode, so each episode becomes one interaction
sequence with a known ground truth.
"""

import logging

import numpy as np
from scipy import signal

from exceptions import InvalidConfigError
from models import (
    Drive,
    DistractionEpisode,
    EpisodeLabel,
    EpisodeLayout,
    Gesture,
    GroundTruth,
    SpeedTrace,
    SteeringTrace,
    SynthConfig,
    SynthCorpusConfig,
    UIEvent,
)

__all__ = [
    "generate_drive",
    "generate_corpus",
    "evenly_spaced_episodes",
    "corpus_template",
    "derive_seed",
]

logger = logging.getLogger(__name__)

# UI elements cycled through by synthetic tap bursts
_ELEMENTS = ("media.next", "climate.temp_up", "nav.zoom")

_GRID_EPS = 1e-9


def derive_seed(master_seed: int, index: int) -> int:
    """Per-drive seed mixed from the corpus seed and the drive index."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def _episode_at(episodes: list[DistractionEpisode], t: float) -> DistractionEpisode | None:
    for episode in episodes:
        if episode.start <= t < episode.end:
            return episode
    return None


def _held_corrections(
    times: np.ndarray,
    rng: np.random.Generator,
    interval_mean: float,
    magnitude_sd: float,
    episodes: list[DistractionEpisode],
) -> np.ndarray:
    """Piecewise-constant correction values sampled on ``times``."""
    end = float(times[-1])
    change_times = [float(times[0])]
    levels: list[float] = []
    t = change_times[0]
    while True:
        episode = _episode_at(episodes, t)
        sd, mean = magnitude_sd, interval_mean
        if episode is not None:
            sd *= episode.magnitude_multiplier
            mean *= episode.interval_multiplier
        levels.append(float(rng.normal(0.0, sd)) if sd > 0 else 0.0)
        t += float(rng.exponential(mean))
        if t > end:
            break
        change_times.append(t)
    index = np.searchsorted(change_times, times, side="right") - 1
    return np.asarray(levels)[index]


def _smooth(u: np.ndarray, rate: float, time_constant: float) -> np.ndarray:
    """Exact first-order lag, started at rest on the first input."""
    a = float(np.exp(-1.0 / (rate * time_constant)))
    y, _ = signal.lfilter([1.0 - a], [1.0, -a], u, zi=[a * u[0]])
    return np.asarray(y)


def _speed(cfg: SynthConfig, times: np.ndarray) -> np.ndarray:
    segments = sorted(cfg.speed_profile, key=lambda s: s.start)
    starts = np.array([s.start for s in segments])
    speeds = np.array([s.speed for s in segments])
    index = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(segments) - 1)
    return speeds[index]


def _tap_times(episode: DistractionEpisode, tap_interval: float) -> list[float]:
    n = int(np.floor((episode.end - episode.start) / tap_interval + _GRID_EPS))
    taps = [episode.start + k * tap_interval for k in range(n + 1)]
    if taps[-1] < episode.end:
        taps.append(episode.end)
    return taps


def generate_drive(cfg: SynthConfig, drive_id: str = "synth") -> tuple[Drive, GroundTruth]:
    """
    Generate one drive and the ground truth of its distraction episodes.

    Args:
        cfg: Generator parameters; all randomness comes from ``cfg.rng_seed``.
        drive_id: Identifier of the generated drive.

    Returns:
        The drive and its ground-truth labels. The same configuration always
        yields identical output.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    n = int(np.floor(cfg.duration * cfg.rate + _GRID_EPS)) + 1
    times = np.arange(n) / cfg.rate
    episodes = sorted(cfg.episodes, key=lambda e: e.start)

    target = np.zeros(n)
    for segment in cfg.road_profile:
        inside = (times >= segment.start) & (times < segment.end)
        if segment.winding_period is not None:
            phase = 2 * np.pi * (times[inside] - segment.start) / segment.winding_period
            target[inside] += segment.curvature_angle * np.sin(phase)
        else:
            target[inside] += segment.curvature_angle
        if segment.tracking_sd > 0:
            tracking = _held_corrections(
                times, rng, cfg.corrections.interval_mean, segment.tracking_sd, []
            )
            target[inside] += tracking[inside]

    corrections = cfg.corrections
    target += _held_corrections(
        times, rng, corrections.interval_mean, corrections.magnitude_sd, episodes
    )
    steering = _smooth(target, cfg.rate, corrections.time_constant)
    if cfg.noise_sd > 0:
        steering = steering + rng.normal(0.0, cfg.noise_sd, n)

    events: list[UIEvent] = []
    labels: list[EpisodeLabel] = []
    for episode in episodes:
        taps = _tap_times(episode, cfg.tap_interval)
        events.extend(
            UIEvent(time=t, element_id=_ELEMENTS[k % len(_ELEMENTS)], gesture=Gesture.TAP)
            for k, t in enumerate(taps)
        )
        labels.append(
            EpisodeLabel(
                start=episode.start,
                end=episode.end,
                magnitude_multiplier=episode.magnitude_multiplier,
                interval_multiplier=episode.interval_multiplier,
                tap_times=taps,
            )
        )

    drive = Drive(
        drive_id=drive_id,
        steering=SteeringTrace(0.0, cfg.rate, steering),
        speed=SpeedTrace(0.0, cfg.rate, _speed(cfg, times)),
        ui_events=tuple(e for e in events if e.time <= times[-1]),
    )
    logger.debug(
        "Generated drive %s: %d samples, %d episode(s)", drive_id, n, len(episodes)
    )
    return drive, GroundTruth(drive_id=drive_id, seed=cfg.rng_seed, episodes=labels)


def evenly_spaced_episodes(
    duration: float, layout: EpisodeLayout, min_gap: float = 0.0
) -> list[DistractionEpisode]:
    """
    Centre ``layout.count`` episodes in equal slots of the drive.

    Raises:
        InvalidConfigError: If an episode does not fit inside its slot, or
            neighbouring episodes end up closer than ``min_gap``.
    """
    slot = duration / layout.count
    if layout.length >= slot:
        raise InvalidConfigError(
            f"episode length {layout.length:g} s does not fit {layout.count} slots "
            f"of {slot:g} s",
            field="episode_layout.length",
        )
    if layout.count > 1 and slot - layout.length < min_gap - _GRID_EPS:
        raise InvalidConfigError(
            f"episodes of {layout.length:g} s in slots of {slot:g} s leave less than "
            f"{min_gap:g} s between them",
            field="episode_layout.length",
        )
    offset = (slot - layout.length) / 2
    return [
        DistractionEpisode(
            start=i * slot + offset,
            end=i * slot + offset + layout.length,
            magnitude_multiplier=layout.magnitude_multiplier,
            interval_multiplier=layout.interval_multiplier,
        )
        for i in range(layout.count)
    ]


def corpus_template(cfg: SynthCorpusConfig) -> SynthConfig:
    """The per-drive template of a corpus, with its episode layout applied."""
    template = cfg.drive
    if cfg.episode_layout is None:
        return template
    episodes = evenly_spaced_episodes(
        template.duration, cfg.episode_layout, template.min_episode_gap
    )
    return template.model_copy(update={"episodes": episodes})


def generate_corpus(cfg: SynthCorpusConfig) -> list[tuple[Drive, GroundTruth]]:
    """
    Generate ``cfg.n_drives`` drives from one template.

    Drive ``i`` is seeded with ``derive_seed(cfg.rng_seed, i)`` and named
    ``<prefix>-<i:04d>``; with an episode layout every drive gets the same
    evenly spaced episodes.
    """
    template = corpus_template(cfg)
    corpus: list[tuple[Drive, GroundTruth]] = []
    for i in range(cfg.n_drives):
        drive_cfg = template.model_copy(update={"rng_seed": derive_seed(cfg.rng_seed, i)})
        corpus.append(generate_drive(drive_cfg, f"{cfg.drive_id_prefix}-{i:04d}"))
    logger.info("Generated %d synthetic drive(s)", len(corpus))
    return corpus
