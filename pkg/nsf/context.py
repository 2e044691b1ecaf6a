import os
import logging
import argparse

from datetime import datetime
from dataclasses import dataclass, field
from multiprocessing import cpu_count

from .util import IoError, get_file_formatter


def default_jobs() -> int:
    """
    Worker cap for sweeps: ``NSF_THREADS`` when set, otherwise the number of
    CPU cores (limited to 64 at most).
    """
    cap = min(cpu_count(), 64)
    env = os.environ.get("NSF_THREADS", "").strip()
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            logging.getLogger("nsf").warning(f"ignoring non-integer NSF_THREADS={env!r}")
    return cap


@dataclass(frozen=True)
class ContextPaths:
    """
    Absolute, read-only, paths used throughout a run.
    """

    #: Working directory when the simulator was started.
    workdir: str

    #: Directory receiving all outputs of the current command.
    output: str

    @property
    def log(self) -> str:
        """Directory containing all logs."""
        return os.path.join(self.output, "log")

    @property
    def debuglog(self) -> str:
        """Path to the debug log."""
        return os.path.join(self.log, "debug.txt")

    @property
    def diagnostics(self) -> str:
        """CSV file with one diagnostics row per cadence tick."""
        return os.path.join(self.output, "diagnostics.csv")

    @property
    def summary(self) -> str:
        """CSV file with the acceptance gates of a single run."""
        return os.path.join(self.output, "summary.csv")

    @property
    def snapshots(self) -> str:
        """Directory with legacy VTK field snapshots."""
        return os.path.join(self.output, "snapshots")

    @property
    def sweep_report(self) -> str:
        """CSV file with one row per sweep member."""
        return os.path.join(self.output, "sweep.csv")

    @property
    def rates(self) -> str:
        """CSV file with the fitted decay rate of each sweep metric."""
        return os.path.join(self.output, "rates.csv")

    def member(self, name: str) -> "ContextPaths":
        """Paths of a sweep member, nested below this output directory."""
        return ContextPaths(self.workdir, os.path.join(self.output, name))


@dataclass(slots=True)
class Context:
    """
    The global configuration context, passed to every command.
    """

    #: Absolute paths to be used (readonly) throughout the framework.
    paths: ContextPaths

    #: The logging object used for status updates.
    log: logging.Logger

    #: The logging level as requested by the user.
    #:
    #: Note that is differs from the logging object's log level, since all debug output
    #: is written to a file regardless of the requested loglevel.
    loglevel: int = logging.NOTSET

    #: Populated with processed command-line arguments.
    args: argparse.Namespace = field(default_factory=argparse.Namespace)

    #: When the current run was started.
    starttime: datetime = field(default_factory=datetime.now)

    #: The amount of parallel sweep members, see :func:`default_jobs`.
    jobs: int = field(default_factory=default_jobs)

    #: Forces sequential sweeps and fixed output formatting.
    deterministic: bool = False

    def open_output(self, output: str) -> ContextPaths:
        """
        Points :attr:`paths` at ``output``, creates the directory tree and
        starts writing the debug log there.
        """
        self.paths = ContextPaths(self.paths.workdir, os.path.abspath(output))
        try:
            os.makedirs(self.paths.log, exist_ok=True)
            handler = logging.FileHandler(self.paths.debuglog, mode="w")
        except OSError as e:
            raise IoError(f"cannot create output directory {output}: {e.strerror}")
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(get_file_formatter())
        self.log.addHandler(handler)
        return self.paths
