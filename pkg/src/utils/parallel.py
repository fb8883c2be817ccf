"""Order-preserving fan-out over worker processes.

Per-drive work is independent, so it is mapped over a process pool when more
than one job is requested. Results always come back in input order, which
keeps every downstream merge deterministic.
"""

import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

__all__ = ["ordered_map"]

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    jobs: int = 1,
    chunksize: int = 1,
) -> list[R]:
    """
    Apply ``fn`` to every item, in worker processes when ``jobs > 1``.

    Args:
        fn: A picklable, module-level function.
        items: Inputs to map over.
        jobs: Number of worker processes; 1 runs in the calling process.
        chunksize: Items handed to a worker at a time.

    Returns:
        Results in the order of ``items``. The first exception raised by
        ``fn`` propagates to the caller.
    """
    work = list(items)
    if jobs <= 1 or len(work) <= 1:
        return [fn(item) for item in work]

    workers = min(jobs, len(work))
    logger.debug("Mapping %r over %d item(s) with %d worker(s)", fn, len(work), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work, chunksize=chunksize))
