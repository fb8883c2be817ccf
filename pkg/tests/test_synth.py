"""Tests for the synthetic drive generator."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from exceptions import InvalidConfigError  # noqa: E402
from models import (  # noqa: E402
    CorrectionModel,
    DistractionEpisode,
    EpisodeLayout,
    PipelineConfig,
    RoadSegment,
    SpeedSegment,
    SynthConfig,
    SynthCorpusConfig,
    validate_drive,
)
from sequencer import extract_interaction_sequences  # noqa: E402
from synth import (  # noqa: E402
    derive_seed,
    evenly_spaced_episodes,
    generate_corpus,
    generate_drive,
)


def make_synth_config(**overrides: object) -> SynthConfig:
    """Create a 10 minute drive with two distraction episodes."""
    params: dict[str, object] = {
        "duration": 600.0,
        "episodes": [
            DistractionEpisode(start=100.0, end=130.0),
            DistractionEpisode(start=400.0, end=422.0),
        ],
        "rng_seed": 11,
    }
    params.update(overrides)
    return SynthConfig.model_validate(params)


class TestGenerateDrive:
    """Tests for generate_drive."""

    def test_grid(self) -> None:
        """Should sample duration * rate + 1 points from t = 0."""
        drive, _ = generate_drive(make_synth_config())
        assert drive.steering.start_time == 0.0
        assert drive.steering.sample_rate == 5.0
        assert len(drive.steering) == 3001
        assert len(drive.speed) == 3001
        assert drive.span == pytest.approx((0.0, 600.0))

    def test_passes_validation(self) -> None:
        """Should produce drives that satisfy every drive invariant."""
        drive, _ = generate_drive(make_synth_config())
        assert validate_drive(drive) == []

    def test_deterministic(self) -> None:
        """Should reproduce the drive for a seed and change it for another."""
        first = generate_drive(make_synth_config())
        again = generate_drive(make_synth_config())
        other = generate_drive(make_synth_config(rng_seed=12))
        assert first == again
        assert not np.array_equal(first[0].steering.values, other[0].steering.values)

    def test_quiet_straight_road_is_constant(self) -> None:
        """Should hold the wheel still without corrections or noise."""
        cfg = make_synth_config(
            corrections=CorrectionModel(magnitude_sd=0.0),
            noise_sd=0.0,
            episodes=[],
        )
        drive, _ = generate_drive(cfg)
        np.testing.assert_array_equal(drive.steering.values, 0.0)

    def test_constant_curve(self) -> None:
        """Should settle on the curvature angle of a constant curve."""
        cfg = make_synth_config(
            corrections=CorrectionModel(magnitude_sd=0.0),
            noise_sd=0.0,
            episodes=[],
            road_profile=[RoadSegment(start=0.0, end=700.0, curvature_angle=15.0)],
        )
        drive, _ = generate_drive(cfg)
        np.testing.assert_allclose(drive.steering.values, 15.0, atol=1e-9)

    def test_speed_profile(self) -> None:
        """Should hold each speed until the next segment."""
        cfg = make_synth_config(
            speed_profile=[SpeedSegment(start=0.0, speed=40.0), SpeedSegment(start=300.0, speed=100.0)]
        )
        drive, _ = generate_drive(cfg)
        assert drive.speed.values[0] == 40.0
        assert drive.speed.values[1499] == 40.0
        assert drive.speed.values[1500] == 100.0

    def test_taps_span_each_episode(self) -> None:
        """Should tap from episode start to end at the tap interval."""
        drive, truth = generate_drive(make_synth_config())
        assert [label.tap_times for label in truth.episodes] == [
            [100.0 + 3.0 * k for k in range(11)],
            [400.0 + 3.0 * k for k in range(8)] + [422.0],
        ]
        assert len(drive.ui_events) == 11 + 9
        assert {e.element_id for e in drive.ui_events} == {"media.next", "climate.temp_up", "nav.zoom"}

    def test_each_episode_is_one_sequence(self) -> None:
        """Should turn every episode into exactly one interaction sequence."""
        drive, truth = generate_drive(make_synth_config())
        seqs = extract_interaction_sequences(drive, PipelineConfig())
        assert [(s.core_start, s.core_end) for s in seqs] == [
            (label.start, label.end) for label in truth.episodes
        ]

    def test_distraction_raises_steering_activity(self) -> None:
        """Should steer more erratically inside long distraction episodes."""
        cfg = make_synth_config(
            duration=3000.0,
            episodes=[DistractionEpisode(start=1000.0, end=2000.0, magnitude_multiplier=4.0)],
        )
        drive, _ = generate_drive(cfg)
        inside = np.diff(drive.steering.values[5000:10000])
        outside = np.diff(drive.steering.values[:5000])
        assert np.std(inside) > 1.5 * np.std(outside)


class TestEpisodes:
    """Tests for evenly spaced episode layouts."""

    def test_centred_in_slots(self) -> None:
        """Should centre one episode per slot."""
        episodes = evenly_spaced_episodes(600.0, EpisodeLayout(count=3, length=20.0))
        assert [(e.start, e.end) for e in episodes] == [(90.0, 110.0), (290.0, 310.0), (490.0, 510.0)]

    def test_episode_longer_than_slot(self) -> None:
        """Should reject episodes that do not fit their slot."""
        with pytest.raises(InvalidConfigError) as exc_info:
            evenly_spaced_episodes(100.0, EpisodeLayout(count=5, length=20.0))
        assert exc_info.value.field == "episode_layout.length"

    def test_episodes_closer_than_min_gap(self) -> None:
        """Should reject layouts leaving less than the minimum gap between episodes."""
        with pytest.raises(InvalidConfigError) as exc_info:
            evenly_spaced_episodes(100.0, EpisodeLayout(count=4, length=20.0), min_gap=10.0)
        assert exc_info.value.field == "episode_layout.length"
        assert len(evenly_spaced_episodes(100.0, EpisodeLayout(count=4, length=20.0))) == 4

    def test_layout_respects_template_gap(self) -> None:
        """Should check a corpus layout against the drive template's minimum gap."""
        cfg = SynthCorpusConfig(
            n_drives=1,
            drive=SynthConfig(duration=100.0, min_episode_gap=10.0),
            episode_layout=EpisodeLayout(count=4, length=20.0),
        )
        with pytest.raises(InvalidConfigError):
            generate_corpus(cfg)

    def test_episodes_min_gap_apart_stay_separate(self) -> None:
        """Should extract one sequence per episode when episodes are the minimum gap apart."""
        cfg = make_synth_config(
            episodes=[
                DistractionEpisode(start=100.0, end=120.0),
                DistractionEpisode(start=130.0, end=150.0),
            ]
        )
        drive, _ = generate_drive(cfg)
        seqs = extract_interaction_sequences(drive, PipelineConfig())
        assert [(s.core_start, s.core_end) for s in seqs] == [(100.0, 120.0), (130.0, 150.0)]


class TestGenerateCorpus:
    """Tests for generate_corpus."""

    def test_ids_and_seeds(self) -> None:
        """Should name drives by index and derive their seeds."""
        cfg = SynthCorpusConfig(
            n_drives=3,
            drive=SynthConfig(duration=120.0),
            episode_layout=EpisodeLayout(count=2, length=10.0),
            rng_seed=5,
        )
        corpus = generate_corpus(cfg)
        assert [d.drive_id for d, _ in corpus] == ["drive-0000", "drive-0001", "drive-0002"]
        assert [t.seed for _, t in corpus] == [derive_seed(5, i) for i in range(3)]
        assert all(len(t.episodes) == 2 for _, t in corpus)
        assert len({d.steering.values.tobytes() for d, _ in corpus}) == 3

    def test_derived_seeds_differ(self) -> None:
        """Should derive distinct seeds per index and master seed."""
        seeds = {derive_seed(m, i) for m in range(3) for i in range(50)}
        assert len(seeds) == 150
