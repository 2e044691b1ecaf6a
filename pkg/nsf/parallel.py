import logging

from abc import ABCMeta, abstractmethod
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable


@dataclass
class Job:
    """A unit of work submitted to a :class:`Pool`."""

    jobid: str
    fn: Callable[..., Any]
    args: tuple[Any, ...] = ()
    onsuccess: Callable[["Job"], None] | None = None
    onerror: Callable[["Job"], None] | None = None
    result: Any = None
    error: BaseException | None = None
    future: Future | None = field(default=None, repr=False)

    @property
    def failed(self) -> bool:
        return self.error is not None


class Pool(metaclass=ABCMeta):
    """
    A pool runs sweep members when ``--parallel`` is given on the command line.
    Jobs are submitted with :func:`submit`; :func:`wait_all` blocks until every
    job has finished and has had its ``onsuccess`` or ``onerror`` callback
    called. Callbacks always run in the submitting process, in submission
    order, so they may write shared reports.

    The number of concurrently running jobs is controlled by ``--parallelmax``,
    capped by the ``NSF_THREADS`` environment variable.
    """

    def __init__(self, logger: logging.Logger, parallelmax: int):
        """
        :param logger: logging object for status updates (set to ``ctx.log``)
        :param parallelmax: value of ``--parallelmax``
        """
        self.log = logger
        self.parallelmax = max(1, parallelmax)
        self.jobs: list[Job] = []

    def submit(
        self,
        jobid: str,
        fn: Callable[..., Any],
        *args: Any,
        onsuccess: Callable[[Job], None] | None = None,
        onerror: Callable[[Job], None] | None = None,
    ) -> Job:
        job = Job(jobid, fn, args, onsuccess, onerror)
        self.jobs.append(job)
        self.log.debug(f"submitting job {jobid}")
        self._start(job)
        return job

    @abstractmethod
    def _start(self, job: Job) -> None:
        pass

    @abstractmethod
    def _collect(self, job: Job) -> None:
        """Fills in ``job.result`` or ``job.error``."""
        pass

    def wait_all(self) -> list[Job]:
        done = []
        for job in self.jobs:
            self._collect(job)
            if job.failed:
                self.log.error(f"job {job.jobid} failed: {job.error}")
                if job.onerror:
                    job.onerror(job)
            else:
                self.log.debug(f"job {job.jobid} finished")
                if job.onsuccess:
                    job.onsuccess(job)
            done.append(job)
        self.jobs = []
        self._shutdown()
        return done

    def _shutdown(self) -> None:
        pass


class SequentialPool(Pool):
    """Runs every job in the calling process, in submission order."""

    def __init__(self, logger: logging.Logger):
        super().__init__(logger, 1)

    def _start(self, job: Job) -> None:
        try:
            job.result = job.fn(*job.args)
        except Exception as e:
            job.error = e

    def _collect(self, job: Job) -> None:
        pass


class ProcessPool(Pool):
    """Runs jobs in up to ``parallelmax`` worker processes."""

    def __init__(self, logger: logging.Logger, parallelmax: int):
        super().__init__(logger, parallelmax)
        self.executor = ProcessPoolExecutor(max_workers=self.parallelmax)

    def _start(self, job: Job) -> None:
        job.future = self.executor.submit(job.fn, *job.args)

    def _collect(self, job: Job) -> None:
        assert job.future is not None
        try:
            job.result = job.future.result()
        except Exception as e:
            job.error = e

    def _shutdown(self) -> None:
        self.executor.shutdown(wait=True)
