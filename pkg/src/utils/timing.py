"""Wall-clock timing of pipeline stages."""

import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager

__all__ = ["StageTimer"]

logger = logging.getLogger(__name__)


class StageTimer:
    """Accumulates elapsed seconds per named stage.

    Example:
        >>> timer = StageTimer()
        >>> with timer.stage("ingest"):
        ...     drives = load()
        >>> timer.timings["ingest"]
    """

    def __init__(self) -> None:
        """Initialize with no recorded stages."""
        self.timings: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """
        Time the enclosed block and add it to ``name``.

        A stage entered more than once accumulates its durations. The time
        is recorded even when the block raises.
        """
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.timings[name] = self.timings.get(name, 0.0) + elapsed
            logger.info("Stage %s finished in %.3f s", name, elapsed)

    @property
    def total(self) -> float:
        """Sum of all recorded stage durations."""
        return sum(self.timings.values())
