"""Seeded random streams, interval sampling and the worker pool.

Every random draw in the package comes from a generator derived from the
master seed plus a tuple of counters, so a cell of work sees the same
numbers whichever process runs it.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import os
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
from numpy.random import default_rng

logger = logging.getLogger(__name__)

T = TypeVar("T")

# stream tags keep model, instrument and time draws independent
STREAM_MODEL = 0
STREAM_INSTRUMENT = 1
STREAM_TIMES = 2
STREAM_STATE = 3


def derive_rng(seed: int, *counters: int) -> np.random.Generator:
    """Independent generator for the cell ``(seed, *counters)``."""
    return default_rng([int(seed), *(int(c) for c in counters)])


def derive_seed(seed: int, *counters: int) -> int:
    return int(derive_rng(seed, *counters).integers(0, 2**63 - 1))


def sample_intervals(rng: np.random.Generator, steps: int, low: float, high: float) -> tuple[float, ...]:
    """One interval per step, uniform on [low, high]."""
    return tuple(float(t) for t in rng.uniform(low, high, size=steps))


def resolve_workers(workers: int | None) -> int:
    """0 or None means one worker per core, capped at 20."""
    if workers and workers > 0:
        return int(workers)
    return min(20, os.cpu_count() or 1)


def parallel_map(fn: Callable[..., T], args: Iterable[Sequence], workers: int | None = 1) -> list[T]:
    """Ordered ``starmap`` of ``fn`` over ``args``; sequential for a single worker."""
    args = [tuple(a) for a in args]
    n_jobs = min(resolve_workers(workers), max(1, len(args)))
    if n_jobs == 1:
        return [fn(*a) for a in args]
    logger.debug("dispatching %d tasks to %d workers", len(args), n_jobs)
    with mp.Pool(processes=n_jobs) as pool:
        return pool.starmap(fn, args)
