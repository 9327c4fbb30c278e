"""Replicate-level parallel execution with worker-count independent results."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

__all__ = ["WORKERS_ENV", "default_workers", "run_parallel"]

WORKERS_ENV = "STABLEREG_WORKERS"

T = TypeVar("T")


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None


def run_parallel(fn: Callable[..., T], jobs: Sequence, workers: int | None = None) -> list[T]:
    """``[fn(job) for job in jobs]``, optionally spread over processes.

    Each job carries its own seed and stream index, so the result list does
    not depend on ``workers``; results are returned in job order.
    """
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    chunk = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))
