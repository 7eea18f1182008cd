"""
helper.py - a small worker pool with a spawn/waitall interface.

Results are always handed back in spawn order, whatever order the workers
finish in, so reductions over them are deterministic.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, List

__all__ = ["WorkerPool", "map_ordered"]


class WorkerPool:
    """
    Covers the API the project uses:
        * spawn(fn, *a, **kw) -> Future
        * waitall()           -> list of results in spawn order

    With workers <= 1 every job runs inline at spawn time, which keeps
    tracebacks simple and serial runs free of thread overhead.
    """

    def __init__(self, workers: int = 1) -> None:
        self.workers = max(1, int(workers or 1))
        self._executor = None
        if self.workers > 1:
            self._executor = ThreadPoolExecutor(max_workers=self.workers)
        self._jobs: List[Any] = []

    def spawn(self, fn: Callable[..., Any], *args: Any, **kwargs: Any):
        if self._executor is None:
            job = _Done(fn(*args, **kwargs))
        else:
            job = self._executor.submit(fn, *args, **kwargs)
        self._jobs.append(job)
        return job

    def waitall(self) -> List[Any]:
        """Block until every spawned job has finished; re-raises the first failure."""
        try:
            return [job.result() for job in self._jobs]
        finally:
            self._jobs = []

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


class _Done:  # pylint: disable=too-few-public-methods
    """Already-computed stand-in for a Future."""

    def __init__(self, value):
        self.value = value

    def result(self):
        return self.value


def map_ordered(fn: Callable[[Any], Any], items, workers: int = 1) -> List[Any]:
    """Apply fn to every item, possibly in parallel, returning results in item order."""
    with WorkerPool(workers) as pool:
        for item in items:
            pool.spawn(fn, item)
        return pool.waitall()
