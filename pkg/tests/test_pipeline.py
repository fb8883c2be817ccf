"""Tests for pipeline orchestration, including statistical acceptance runs."""

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from exceptions import MissingInputError  # noqa: E402
from models import (  # noqa: E402
    EpisodeLayout,
    LogFormat,
    PipelineConfig,
    RoadSegment,
    SynthConfig,
    SynthCorpusConfig,
)
from pipeline import (  # noqa: E402
    BASELINE_FILE,
    INTERACTION_FILE,
    ReportResult,
    load_drives,
    run_extract,
    run_report,
    run_synth,
)
from synth import generate_corpus  # noqa: E402


def make_corpus_config(
    n_drives: int = 3,
    duration: float = 300.0,
    count: int = 3,
    length: float = 20.0,
    magnitude: float = 3.0,
    interval: float = 2.0,
    road_profile: list[RoadSegment] | None = None,
    seed: int = 7,
) -> SynthCorpusConfig:
    """Create a corpus config with evenly spaced episodes."""
    return SynthCorpusConfig(
        n_drives=n_drives,
        drive=SynthConfig(duration=duration, road_profile=road_profile or []),
        episode_layout=EpisodeLayout(
            count=count, length=length, magnitude_multiplier=magnitude, interval_multiplier=interval
        ),
        rng_seed=seed,
    )


def effect(result: ReportResult, metric: str, condition: str) -> float:
    """Look up an effect size in a report result."""
    for e in result.report.effect_sizes:
        if (e.metric, e.condition) == (metric, condition):
            return float(e.d)
    raise AssertionError(f"no effect size for {metric}, {condition}")


def run_corpus(
    corpus_cfg: SynthCorpusConfig, tmp_path: Path, cfg: PipelineConfig | None = None
) -> ReportResult:
    """Generate, extract and report on a synthetic corpus."""
    cfg = cfg or PipelineConfig()
    inputs = run_synth(corpus_cfg, tmp_path / "corpus")
    extracted = run_extract(inputs, cfg, tmp_path / "out")
    return run_report(tmp_path / "out", inputs, cfg, tmp_path / "out", drives=extracted.drives)


class TestSynthRoundTrip:
    """Written synthetic logs read back as the generated drives."""

    @pytest.mark.parametrize("format", [LogFormat.JSONL, LogFormat.CSV])
    def test_round_trip(self, tmp_path: Path, format: LogFormat) -> None:
        """Should ingest the written logs into the generated drives."""
        corpus_cfg = make_corpus_config()
        paths = run_synth(corpus_cfg, tmp_path, format=format)
        drives, rejected = load_drives(paths, PipelineConfig())
        expected = [d for d, _ in generate_corpus(corpus_cfg)]

        assert rejected == 0
        assert [d.drive_id for d in drives] == [d.drive_id for d in expected]
        for got, want in zip(drives, expected, strict=True):
            np.testing.assert_array_equal(got.steering.values, want.steering.values)
            np.testing.assert_array_equal(got.speed.values, want.speed.values)
            assert got.steering.start_time == want.steering.start_time
            assert [e.time for e in got.ui_events] == [e.time for e in want.ui_events]
            assert [e.element_id for e in got.ui_events] == [e.element_id for e in want.ui_events]

    def test_truth_file(self, tmp_path: Path) -> None:
        """Should record ground truth per drive in order."""
        run_synth(make_corpus_config(), tmp_path)
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert [t["drive_id"] for t in truth] == ["drive-0000", "drive-0001", "drive-0002"]
        assert truth[0]["episodes"][0]["start"] == 40.0


class TestRunExtract:
    """Tests for run_extract."""

    def test_shortfall_keeps_partial_sample(self, tmp_path: Path) -> None:
        """Should log a shortfall and still write the sequence files."""
        inputs = run_synth(make_corpus_config(n_drives=1, duration=100.0, count=2, length=38.0), tmp_path / "corpus")
        result = run_extract(inputs, PipelineConfig(), tmp_path / "out")

        assert len(result.interactions) == 2
        assert result.baselines == []
        assert result.manifest.counts.shortfall == {"0": 2}
        assert (tmp_path / "out" / BASELINE_FILE).read_text() == ""
        assert len((tmp_path / "out" / INTERACTION_FILE).read_text().splitlines()) == 2

    def test_report_needs_baselines(self, tmp_path: Path) -> None:
        """Should refuse to report without baselines."""
        inputs = run_synth(make_corpus_config(n_drives=1, duration=100.0, count=2, length=38.0), tmp_path / "corpus")
        run_extract(inputs, PipelineConfig(), tmp_path / "out")
        with pytest.raises(MissingInputError):
            run_report(tmp_path / "out", inputs, PipelineConfig(), tmp_path / "out")

    def test_parallel_matches_serial(self, tmp_path: Path) -> None:
        """Should extract the same sequences with two workers as with one."""
        inputs = run_synth(make_corpus_config(), tmp_path / "corpus")
        serial = run_extract(inputs, PipelineConfig(), tmp_path / "serial")
        parallel = run_extract(inputs, PipelineConfig(), tmp_path / "parallel", jobs=2)

        assert parallel.interactions == serial.interactions
        assert parallel.baselines == serial.baselines
        assert (tmp_path / "parallel" / INTERACTION_FILE).read_text() == (
            tmp_path / "serial" / INTERACTION_FILE
        ).read_text()

    def test_no_drives(self, tmp_path: Path) -> None:
        """Should raise MissingInputError when no log holds a drive."""
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        with pytest.raises(MissingInputError):
            run_extract([empty], PipelineConfig(), tmp_path / "out")


class TestRunReport:
    """Tests for run_report."""

    def test_outputs(self, tmp_path: Path) -> None:
        """Should write metrics, reports and the report manifest."""
        inputs = run_synth(make_corpus_config(), tmp_path / "corpus")
        cfg = PipelineConfig()
        run_extract(inputs, cfg, tmp_path / "out")
        result = run_report(tmp_path / "out", inputs, cfg, tmp_path / "out", format="json")

        assert [p.name for p in result.outputs] == [
            "metrics.jsonl",
            "report.json",
            "effect_sizes.json",
            "plot_data.json",
            "report_manifest.json",
        ]
        assert len(result.interaction_metrics) == 9
        assert len(result.baseline_metrics) == 9
        lines = (tmp_path / "out" / "metrics.jsonl").read_text().splitlines()
        assert [json.loads(line)["kind"] for line in lines] == ["interaction"] * 9 + ["baseline"] * 9
        assert result.manifest.alpha == result.alpha
        assert result.manifest.counts.metrics_baseline == 9
        assert {f.path for f in result.manifest.inputs} >= {INTERACTION_FILE, BASELINE_FILE}

    def test_parallel_matches_serial(self, tmp_path: Path) -> None:
        """Should compute the same metrics with two workers as with one."""
        inputs = run_synth(make_corpus_config(), tmp_path / "corpus")
        cfg = PipelineConfig()
        run_extract(inputs, cfg, tmp_path / "out")
        serial = run_report(tmp_path / "out", inputs, cfg, tmp_path / "serial")
        parallel = run_report(tmp_path / "out", inputs, cfg, tmp_path / "parallel", jobs=2)

        assert parallel.alpha == serial.alpha
        np.testing.assert_array_equal(
            [m.steering_entropy for m in parallel.interaction_metrics],
            [m.steering_entropy for m in serial.interaction_metrics],
        )


@pytest.mark.slow
class TestAcceptance:
    """Statistical behaviour on larger synthetic corpora.

    Every corpus pins its master seed so the effect sizes are reproducible.
    """

    def test_detects_distraction(self, tmp_path: Path) -> None:
        """Should find higher entropy and reversal rate during interactions."""
        corpus_cfg = make_corpus_config(n_drives=50, duration=600.0, count=10, seed=7)
        result = run_corpus(corpus_cfg, tmp_path)
        assert effect(result, "se", "all") > 0.2
        assert effect(result, "swrr_2", "all") > 0.0

    def test_null_corpus(self, tmp_path: Path) -> None:
        """Should find no effect when taps do not change steering."""
        corpus_cfg = make_corpus_config(
            n_drives=50, duration=600.0, count=10, magnitude=1.0, interval=1.0, seed=7
        )
        result = run_corpus(corpus_cfg, tmp_path)
        assert len(result.interaction_metrics) == 500
        assert abs(effect(result, "se", "all")) < 0.1
        assert abs(effect(result, "swrr_2", "all")) < 0.1

    def test_curves_dilute_effect(self, tmp_path: Path) -> None:
        """Should show a smaller entropy effect on curves than on straights."""
        road = [RoadSegment(start=600.0, end=1201.0, curvature_angle=20.0, tracking_sd=2.0)]
        corpus_cfg = make_corpus_config(
            n_drives=30, duration=1200.0, count=10, road_profile=road, seed=7
        )
        result = run_corpus(corpus_cfg, tmp_path)
        assert effect(result, "se", "straight") > effect(result, "se", "curved")

    def test_million_samples_within_budget(self, tmp_path: Path) -> None:
        """Should extract and report on a million steering samples in under 30 s."""
        corpus_cfg = make_corpus_config(n_drives=10, duration=20000.0, count=100, seed=7)
        inputs = run_synth(corpus_cfg, tmp_path / "corpus")
        cfg = PipelineConfig()

        start = time.perf_counter()
        run_extract(inputs, cfg, tmp_path / "out")
        result = run_report(tmp_path / "out", inputs, cfg, tmp_path / "out")
        elapsed = time.perf_counter() - start

        assert len(result.interaction_metrics) == 1000
        assert elapsed < 30.0
