"""Utility for running Monte Carlo instances with sweep context on failures."""

from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import TypeVar

from loguru import logger

from ..config import DEFAULT_JOBS
from ..errors import SweepError

Result = TypeVar("Result")


def _with_context(fn: Callable[..., Result], job: tuple[int, int]) -> Result:
    m, instance = job
    try:
        return fn(m, instance)
    except SweepError:
        raise
    except Exception as e:
        raise SweepError(m, instance, e) from e


class InstanceRunner:
    """Runs (m, instance) jobs inline or on a process pool, returning results in job order."""

    def __init__(self, jobs: int = DEFAULT_JOBS) -> None:
        self.jobs = max(1, jobs)

    def run(self, fn: Callable[[int, int], Result], jobs: list[tuple[int, int]]) -> list[Result]:
        """Run `fn(m, instance)` for every job.

        Args:
            fn: Picklable callable when more than one worker is used
            jobs: (m, instance) pairs

        Returns:
            Results ordered like `jobs`
        """
        task = partial(_with_context, fn)
        if self.jobs == 1 or len(jobs) <= 1:
            return [task(job) for job in jobs]

        logger.info(f"Running {len(jobs)} instances on {self.jobs} workers")
        with ProcessPoolExecutor(max_workers=self.jobs) as executor:
            try:
                return list(executor.map(task, jobs, chunksize=max(1, len(jobs) // (4 * self.jobs))))
            except SweepError as e:
                logger.error(f"Instance failed: {e}")
                executor.shutdown(cancel_futures=True)
                raise
