import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Callable, Dict, List, Sequence, Tuple

logger = logging.getLogger(__name__)


class Simulation:
    """Runs independent trial jobs, in worker processes when parallelism > 1.

    Results are returned in job order, never completion order. Completed results stay available in `results` after a
    failure or a terminate(). A KeyboardInterrupt during run() terminates it.
    """

    def __init__(self, parallelism: int = 1, progress_advanced: Callable[[int], None] = None):
        if parallelism < 1:
            raise ValueError(f"parallelism = {parallelism} must be at least 1")

        self.parallelism = parallelism
        self.progress_advanced = progress_advanced
        """Callback invoked every time progress is made, with the percentage of completion 0 - 100."""

        self.results: Dict[int, Any] = {}
        self.total = 0
        self.current_progress = None
        self.terminate_flag = False
        """Flag that is set if the simulation was terminated manually."""
        self._running = False

    @property
    def running(self):
        """Return True if the simulation is currently in progress."""
        return self._running

    def terminate(self):
        """Stop scheduling new jobs. Jobs already executing in a worker finish but their results are discarded."""
        if self.running:
            self.terminate_flag = True

    def _completed(self, index, result):
        self.results[index] = result

        progress = len(self.results) * 100 // self.total
        if progress != self.current_progress and self.progress_advanced is not None:
            self.progress_advanced(progress)
        self.current_progress = progress

    def run(self, jobs: Sequence[Tuple[Callable, tuple]]) -> List[Any]:
        """Execute every (function, args) job and return the results in job order.

        The first exception raised by a job is re-raised after the remaining jobs are cancelled.
        """
        self.results = {}
        self.total = len(jobs)
        self.current_progress = None
        self.terminate_flag = False
        self._running = True

        try:
            if self.parallelism == 1 or self.total <= 1:
                for index, (function, args) in enumerate(jobs):
                    if self.terminate_flag:
                        break
                    self._completed(index, function(*args))
            else:
                self._run_pool(jobs)
        except KeyboardInterrupt:
            self.terminate()
        finally:
            self._running = False

        if self.terminate_flag:
            logger.info("simulation terminated after %d of %d jobs", len(self.results), self.total)
        return [self.results[index] for index in sorted(self.results)]

    def _run_pool(self, jobs):
        workers = min(self.parallelism, self.total)
        logger.debug("running %d jobs on %d worker processes", self.total, workers)

        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(function, *args): index for index, (function, args) in enumerate(jobs)}
            try:
                for future in as_completed(futures):
                    self._completed(futures[future], future.result())
                    if self.terminate_flag:
                        break
            finally:
                for future in futures:
                    future.cancel()
