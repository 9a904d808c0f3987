# app/services/worker_service.py
"""
Provides a service for fanning independent trials out to a worker pool.

Every trial is identified by its index and draws its randomness from a seed
derived from that index, so results are re-assembled in index order and the
number of workers never changes a report.

Threads are used rather than processes: families and goals carry closures
that cannot be pickled.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar
from .config_service import config

logger = logging.getLogger(__name__)

T = TypeVar('T')


class WorkerService:
    def __init__(self, default_workers: int = 1):
        self.default_workers = max(1, int(default_workers))

    def _chunks(self, n: int, workers: int, chunk_size: Optional[int]) -> List[range]:
        """Splits 0..n-1 into contiguous index ranges."""
        size = chunk_size or max(1, math.ceil(n / (workers * 4)))
        return [range(start, min(start + size, n)) for start in range(0, n, size)]

    def run_indexed(self, fn: Callable[[int], T], n: int, workers: Optional[int] = None,
                    chunk_size: Optional[int] = None) -> List[T]:
        """
        Evaluates fn(0), ..., fn(n-1) and returns the results in index order.

        Args:
            fn: A function of the trial index only.
            n: Number of trials.
            workers: Pool size; defaults to the configured worker count.
            chunk_size: Indices per submitted task.

        Returns:
            The list [fn(0), ..., fn(n-1)].
        """
        workers = self.default_workers if workers is None else max(1, int(workers))
        if workers == 1 or n <= 1:
            return [fn(i) for i in range(n)]

        chunks = self._chunks(n, workers, chunk_size)
        logger.debug(f"Running {n} trials in {len(chunks)} chunks on {workers} workers.")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(lambda r: [fn(i) for i in r], chunk) for chunk in chunks]
            results: List[T] = []
            for future in futures:
                results.extend(future.result())
        return results


# Singleton instance
worker_service = WorkerService(config.workers)


def run_indexed(fn: Callable[[int], T], n: int, workers: Optional[int] = None,
                chunk_size: Optional[int] = None) -> List[T]:
    return worker_service.run_indexed(fn, n, workers, chunk_size)
