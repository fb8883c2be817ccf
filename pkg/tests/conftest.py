"""Pytest configuration and shared fixtures.

This module provides drive builders and configurations used across all test
modules.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from models import (  # noqa: E402
    AdasFeature,
    AdasInterval,
    Drive,
    Gesture,
    PipelineConfig,
    SpeedTrace,
    SteeringTrace,
    UIEvent,
)

FIXTURES = Path(__file__).parent / "fixtures"


def make_drive(
    duration: float = 60.0,
    rate: float = 5.0,
    steering: np.ndarray | None = None,
    speed: float | np.ndarray = 50.0,
    events: list[float] | None = None,
    adas: list[tuple[float, float]] | None = None,
    drive_id: str = "drive-a",
    start: float = 0.0,
) -> Drive:
    """Create a drive on a uniform grid with taps at ``events``."""
    n = int(round(duration * rate)) + 1
    theta = np.zeros(n) if steering is None else np.asarray(steering, dtype=float)
    v = np.full(theta.size, speed, dtype=float) if np.isscalar(speed) else np.asarray(speed)
    return Drive(
        drive_id=drive_id,
        steering=SteeringTrace(start, rate, theta),
        speed=SpeedTrace(start, rate, v),
        ui_events=tuple(
            UIEvent(time=t, element_id=f"el{i % 2}", gesture=Gesture.TAP)
            for i, t in enumerate(events or [])
        ),
        adas=tuple(
            AdasInterval(start=s, end=e, feature=AdasFeature.CRUISE_CONTROL)
            for s, e in (adas or [])
        ),
    )


def triangle_wave(n: int, rate: float, amplitude: float, period: float) -> np.ndarray:
    """Triangle wave starting at zero and rising, sampled at ``rate``."""
    t = np.arange(n) / rate
    phase = (t / period + 0.25) % 1.0
    return amplitude * (4 * np.abs(phase - 0.5) - 1) * -1


@pytest.fixture
def cfg() -> PipelineConfig:
    """Provide the default pipeline configuration."""
    return PipelineConfig()


@pytest.fixture
def fixtures_dir() -> Path:
    """Provide the directory of file fixtures."""
    return FIXTURES


@pytest.fixture
def rng() -> np.random.Generator:
    """Provide a seeded random generator."""
    return np.random.default_rng(12345)
