"""Tests for configuration loading and the exception hierarchy."""

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from config import _parse_jobs, load_model_file  # noqa: E402
from exceptions import (  # noqa: E402
    ConfigError,
    DataError,
    EmptyDriveError,
    InvalidConfigError,
    MissingInputError,
    SteerMetricsError,
    UnknownFormatError,
)
from models import PipelineConfig, SynthCorpusConfig  # noqa: E402


class TestParseJobs:
    """Tests for the STEERMETRICS_JOBS environment setting."""

    def test_default_is_serial(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Should default to one job."""
        monkeypatch.delenv("STEERMETRICS_JOBS", raising=False)
        assert _parse_jobs() == 1

    def test_reads_value(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Should parse a positive integer."""
        monkeypatch.setenv("STEERMETRICS_JOBS", "4")
        assert _parse_jobs() == 4

    @pytest.mark.parametrize("value", ["many", "0", "-3"])
    def test_invalid_falls_back(self, monkeypatch: pytest.MonkeyPatch, value: str) -> None:
        """Should fall back to one job on invalid values."""
        monkeypatch.setenv("STEERMETRICS_JOBS", value)
        assert _parse_jobs() == 1


class TestLoadModelFile:
    """Tests for load_model_file."""

    def test_loads_partial_config(self, tmp_path: Path) -> None:
        """Should fill unspecified fields with defaults."""
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"t_max": 8.0, "swrr_gaps": [0.5, 3.0]}))
        cfg = load_model_file(path, PipelineConfig)
        assert cfg.t_max == 8.0
        assert cfg.swrr_gaps == [0.5, 3.0]
        assert cfg.t_buffer == 2.0

    def test_missing_file(self, tmp_path: Path) -> None:
        """Should raise MissingInputError for an absent file."""
        with pytest.raises(MissingInputError):
            load_model_file(tmp_path / "nope.json", PipelineConfig)

    def test_invalid_json(self, tmp_path: Path) -> None:
        """Should raise InvalidConfigError for malformed JSON."""
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        with pytest.raises(InvalidConfigError) as exc_info:
            load_model_file(path, PipelineConfig)
        assert exc_info.value.exit_code == 2

    def test_validation_error_names_field(self, tmp_path: Path) -> None:
        """Should name the dotted path of the first offending field."""
        path = tmp_path / "synth.json"
        path.write_text(json.dumps({"n_drives": 2, "drive": {"duration": -10}}))
        with pytest.raises(InvalidConfigError) as exc_info:
            load_model_file(path, SynthCorpusConfig)
        assert exc_info.value.field == "drive.duration"
        assert "drive.duration" in exc_info.value.message

    def test_unknown_key(self, tmp_path: Path) -> None:
        """Should reject keys the model does not define."""
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"t_maximum": 8.0}))
        with pytest.raises(InvalidConfigError) as exc_info:
            load_model_file(path, PipelineConfig)
        assert exc_info.value.field == "t_maximum"


class TestExceptions:
    """Tests for the exception hierarchy and exit codes."""

    def test_data_errors_exit_one(self) -> None:
        """Should map data errors to exit code 1."""
        error = EmptyDriveError("drive-7")
        assert isinstance(error, DataError)
        assert isinstance(error, SteerMetricsError)
        assert error.exit_code == 1
        assert error.drive_id == "drive-7"
        assert str(error).startswith("[exit 1]")

    def test_config_errors_exit_two(self) -> None:
        """Should map configuration errors to exit code 2."""
        error = UnknownFormatError("xml")
        assert isinstance(error, ConfigError)
        assert error.exit_code == 2
        assert "xml" in error.message

    def test_invalid_config_message(self) -> None:
        """Should prefix the message with the field."""
        error = InvalidConfigError("must be positive", field="gap")
        assert error.message == "gap: must be positive"
        assert InvalidConfigError("bad").message == "bad"
