"""Tests for the domain models and the drive invariant checker."""

import sys
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from models import (  # noqa: E402
    AdasFeature,
    AdasInterval,
    BinDistribution,
    Drive,
    DistractionEpisode,
    Gesture,
    PipelineConfig,
    Sequence,
    SequenceKind,
    SpeedTrace,
    SteeringTrace,
    StratificationPlan,
    SynthConfig,
    UIEvent,
    Violation,
    validate_corpus,
    validate_drive,
)
from tests.conftest import make_drive  # noqa: E402


class TestTrace:
    """Tests for the uniform-grid trace container."""

    def test_timestamps_follow_index_math(self) -> None:
        """Should place sample i at start + i / rate."""
        trace = SteeringTrace(10.0, 5.0, np.zeros(6))
        np.testing.assert_allclose(trace.timestamps(), [10.0, 10.2, 10.4, 10.6, 10.8, 11.0])
        assert trace.end_time == pytest.approx(11.0)
        assert trace.period == pytest.approx(0.2)
        assert len(trace) == 6

    def test_values_are_read_only(self) -> None:
        """Should freeze the value array."""
        trace = SteeringTrace(0.0, 5.0, [1.0, 2.0])
        with pytest.raises(ValueError):
            trace.values[0] = 3.0

    def test_equality_compares_values(self) -> None:
        """Should compare traces by grid and values."""
        a = SteeringTrace(0.0, 5.0, [1.0, 2.0])
        assert a == SteeringTrace(0.0, 5.0, np.array([1.0, 2.0]))
        assert a != SteeringTrace(0.0, 5.0, [1.0, 2.5])
        assert a != SpeedTrace(0.0, 5.0, [1.0, 2.0])


class TestAdasInterval:
    """Tests for closed-interval overlap."""

    def test_touching_endpoints_overlap(self) -> None:
        """Should treat a shared endpoint as overlap."""
        interval = AdasInterval(start=10.0, end=20.0, feature=AdasFeature.CRUISE_CONTROL)
        assert interval.intersects(20.0, 25.0)
        assert interval.intersects(5.0, 10.0)
        assert not interval.intersects(20.001, 25.0)


class TestValidateDrive:
    """Tests for validate_drive."""

    def test_valid_drive_has_no_violations(self) -> None:
        """Should accept a well-formed drive."""
        drive = make_drive(events=[5.0, 6.0], adas=[(30.0, 40.0)])
        assert validate_drive(drive) == []

    def test_nan_steering_reports_index(self) -> None:
        """Should name the first non-finite steering sample."""
        theta = np.zeros(301)
        theta[17] = np.nan
        violations = validate_drive(make_drive(steering=theta))
        assert len(violations) == 1
        assert violations[0].field == "steering.values"
        assert violations[0].index == 17

    def test_negative_speed_is_reported(self) -> None:
        """Should reject negative speed samples."""
        speed = np.full(301, 40.0)
        speed[3] = -1.0
        violations = validate_drive(make_drive(speed=speed))
        assert [(v.field, v.index) for v in violations] == [("speed.values", 3)]

    def test_out_of_order_events(self) -> None:
        """Should report unsorted UI events with their index."""
        drive = make_drive(events=[5.0, 4.0])
        violations = validate_drive(drive)
        assert violations[0].field == "ui_events"
        assert violations[0].index == 1
        assert violations[0].time == 4.0

    def test_event_outside_span(self) -> None:
        """Should report events after the last sample."""
        violations = validate_drive(make_drive(duration=10.0, events=[11.0]))
        assert [v.field for v in violations] == ["ui_events.time"]

    def test_empty_element_id(self) -> None:
        """Should reject events without an element id."""
        base = make_drive()
        drive = Drive(
            drive_id=base.drive_id,
            steering=base.steering,
            speed=base.speed,
            ui_events=(UIEvent(time=1.0, element_id="", gesture=Gesture.TAP),),
        )
        assert [v.field for v in validate_drive(drive)] == ["ui_events.element_id"]

    def test_overlapping_adas_of_one_feature(self) -> None:
        """Should reject overlapping intervals of the same feature."""
        violations = validate_drive(make_drive(adas=[(10.0, 20.0), (15.0, 30.0)]))
        assert [v.field for v in violations] == ["adas.cruise_control"]

    def test_inverted_adas_interval(self) -> None:
        """Should reject intervals that end before they start."""
        violations = validate_drive(make_drive(adas=[(20.0, 10.0)]))
        assert violations[0].field == "adas"

    def test_speed_must_cover_steering(self) -> None:
        """Should reject a speed trace shorter than the steering trace."""
        base = make_drive(duration=10.0)
        drive = Drive(
            drive_id="short-speed",
            steering=base.steering,
            speed=SpeedTrace(0.0, 5.0, np.full(20, 30.0)),
        )
        assert [v.field for v in validate_drive(drive)] == ["speed"]

    def test_violation_str(self) -> None:
        """Should render field, rule and location."""
        v = Violation(field="ui_events", rule="must be sorted by time", index=3, time=1.5)
        assert str(v) == "ui_events: must be sorted by time at index 3 (t=1.5)"


class TestValidateCorpus:
    """Tests for corpus-level checks."""

    def test_duplicate_ids(self) -> None:
        """Should flag the second drive with a repeated id."""
        drives = [make_drive(drive_id="a"), make_drive(drive_id="b"), make_drive(drive_id="a")]
        violations = validate_corpus(drives)
        assert [v.index for v in violations] == [2]


class TestSequence:
    """Tests for the Sequence model."""

    def test_durations_and_record(self) -> None:
        """Should derive durations and flatten without events."""
        event = UIEvent(time=100.0, element_id="x", gesture=Gesture.TAP)
        seq = Sequence(
            drive_id="d",
            kind=SequenceKind.INTERACTION,
            core_start=100.0,
            core_end=130.0,
            window_start=98.0,
            window_end=132.0,
            events=(event, event),
        )
        assert seq.duration == 34.0
        assert seq.core_duration == 30.0
        record = seq.to_record()
        assert record["n_events"] == 2
        assert record["kind"] == "interaction"
        assert "events" not in record


class TestStratificationPlan:
    """Tests for duration-bin lookup."""

    def test_bins_are_half_open_except_last(self) -> None:
        """Should close only the last bin on the right."""
        plan = StratificationPlan(duration_bin_edges=[4.0, 6.0, 10.0], targets=[1, 1])
        assert plan.bin_of(4.0) == 0
        assert plan.bin_of(6.0) == 1
        assert plan.bin_of(10.0) == 1
        assert plan.bin_of(10.5) is None
        assert plan.bin_of(3.9) is None

    def test_outer_edges_are_tolerant(self) -> None:
        """Should keep durations a rounding error outside in the end bins."""
        plan = StratificationPlan(duration_bin_edges=[4.0, 10.0], targets=[2])
        assert plan.bin_of(4.0 - 1e-12) == 0
        assert plan.bin_of(10.0 + 1e-12) == 0

    def test_single_edge_plan(self) -> None:
        """Should describe one degenerate bin."""
        plan = StratificationPlan(duration_bin_edges=[5.0], targets=[3])
        assert plan.n_bins == 1
        assert plan.bin_bounds(0) == (5.0, 5.0)
        assert plan.bin_of(5.0) == 0
        assert plan.bin_of(5.1) is None

    def test_rejects_mismatched_targets(self) -> None:
        """Should require one target per bin."""
        with pytest.raises(ValidationError):
            StratificationPlan(duration_bin_edges=[1.0, 2.0, 3.0], targets=[1])


class TestPipelineConfig:
    """Tests for PipelineConfig defaults and validators."""

    def test_defaults(self) -> None:
        """Should expose the documented defaults."""
        cfg = PipelineConfig()
        assert cfg.t_max == 10.0
        assert cfg.t_buffer == 2.0
        assert cfg.alpha_percentile == 0.9
        assert cfg.swrr_gaps == [1.0, 2.0, 5.0]
        assert cfg.metric_names == ["se", "swrr_1", "swrr_2", "swrr_5"]
        assert cfg.bucket_labels == ["0-30", "30-60", "60-90", "90-120", "120+"]

    def test_trailing_infinity_is_dropped(self) -> None:
        """Should accept an explicit open top edge."""
        cfg = PipelineConfig(speed_bucket_edges=[0.0, 50.0, float("inf")])
        assert cfg.speed_bucket_edges == [0.0, 50.0]
        assert cfg.bucket_labels == ["0-50", "50+"]

    @pytest.mark.parametrize(
        "field,value",
        [
            ("swrr_gaps", [2.0, 1.0]),
            ("swrr_gaps", [0.0]),
            ("swrr_gaps", []),
            ("speed_bucket_edges", [30.0, 10.0]),
            ("alpha_percentile", 1.0),
            ("t_max", 0.0),
        ],
    )
    def test_invalid_values(self, field: str, value: object) -> None:
        """Should reject out-of-range parameters."""
        with pytest.raises(ValidationError):
            PipelineConfig(**{field: value})

    def test_unknown_field_rejected(self) -> None:
        """Should forbid unknown keys."""
        with pytest.raises(ValidationError):
            PipelineConfig(t_maximum=5.0)


class TestBinDistribution:
    """Tests for BinDistribution."""

    def test_requires_nine_bins(self) -> None:
        """Should reject any other bin count."""
        with pytest.raises(ValueError):
            BinDistribution((1.0,) * 8)


class TestSynthConfig:
    """Tests for SynthConfig validation."""

    def test_episode_after_duration(self) -> None:
        """Should reject episodes running past the drive end."""
        with pytest.raises(ValidationError):
            SynthConfig(duration=60.0, episodes=[DistractionEpisode(start=50.0, end=70.0)])

    def test_overlapping_episodes(self) -> None:
        """Should reject overlapping episodes."""
        with pytest.raises(ValidationError):
            SynthConfig(
                duration=100.0,
                episodes=[
                    DistractionEpisode(start=10.0, end=30.0),
                    DistractionEpisode(start=20.0, end=40.0),
                ],
            )

    def test_negative_duration(self) -> None:
        """Should reject non-positive durations."""
        with pytest.raises(ValidationError) as exc_info:
            SynthConfig(duration=-5.0)
        assert exc_info.value.errors()[0]["loc"] == ("duration",)

    def test_episodes_too_close(self) -> None:
        """Should reject episodes closer than the minimum gap."""
        episodes = [
            DistractionEpisode(start=100.0, end=120.0),
            DistractionEpisode(start=125.0, end=140.0),
        ]
        with pytest.raises(ValidationError, match="less than 10 s apart"):
            SynthConfig(duration=200.0, episodes=episodes)
        assert len(SynthConfig(duration=200.0, episodes=episodes, min_episode_gap=0.0).episodes) == 2

    def test_episodes_exactly_min_gap_apart(self) -> None:
        """Should accept episodes separated by exactly the minimum gap."""
        cfg = SynthConfig(
            duration=200.0,
            episodes=[
                DistractionEpisode(start=100.0, end=120.0),
                DistractionEpisode(start=130.0, end=150.0),
            ],
        )
        assert cfg.min_episode_gap == 10.0
