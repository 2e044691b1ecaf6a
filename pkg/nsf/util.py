import math
import re
import logging

from dataclasses import dataclass
from typing import Iterator, MutableMapping, TypeAlias, TypeVar

import numpy as np

ResultVal: TypeAlias = bool | int | float | str
ResultDict: TypeAlias = MutableMapping[str, ResultVal]
T = TypeVar("T")

#: Exit codes returned by :func:`nsf.setup.main`.
EXIT_OK = 0
EXIT_FATAL = 1
EXIT_GATE = 2
EXIT_BLOWUP = 3
EXIT_CONFIG = 4


class Index(MutableMapping[str, T]):
    """
    Registry of named plug-ins or commands. Looking up an unknown name or
    registering a taken one is a :class:`FatalError` whose message lists the
    registered names.
    """

    def __init__(self, kind: str):
        self.kind = kind
        self._entries: dict[str, T] = {}

    def _unknown(self, name: str) -> "FatalError":
        known = ", ".join(sorted(self._entries)) or "none"
        return FatalError(f"unknown {self.kind} '{name}' (registered: {known})")

    def __getitem__(self, name: str) -> T:
        try:
            return self._entries[name]
        except KeyError:
            raise self._unknown(name) from None

    def __setitem__(self, name: str, value: T) -> None:
        if name in self._entries:
            raise FatalError(f"{self.kind} '{name}' is registered twice")
        self._entries[name] = value

    def __delitem__(self, name: str) -> None:
        if name not in self._entries:
            raise self._unknown(name)
        del self._entries[name]

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


class FatalError(Exception):
    """
    An error in the user's input or environment that ends the command.
    :class:`nsf.Setup` logs only its message, without a traceback, and exits
    with :attr:`exit_code`.
    """

    exit_code: int = EXIT_FATAL


class NsfError(FatalError):
    """Base class of the simulator's domain errors."""

    pass


class NegativeInput(NsfError):
    pass


class BadExponent(NsfError):
    pass


class DegenerateGradient(NsfError):
    pass


class EmptyState(NsfError):
    pass


class BlowUp(NsfError):
    """A field left the representable range; carries the offending time."""

    exit_code = EXIT_BLOWUP

    def __init__(self, time: float, detail: str = ""):
        self.time = time
        self.detail = detail
        super().__init__(f"blow-up at t={time:.6g}" + (f": {detail}" if detail else ""))

    def __reduce__(self) -> tuple:
        return type(self), (self.time, self.detail)


class BadConfig(NsfError):
    exit_code = EXIT_CONFIG


class HypothesisViolation(NsfError):
    exit_code = EXIT_CONFIG


class DegenerateSamples(NsfError):
    exit_code = EXIT_CONFIG


class InadmissibleTestFunction(NsfError):
    pass


class GateFailure(NsfError):
    exit_code = EXIT_GATE


class IoError(NsfError):
    pass


@dataclass(frozen=True)
class ConfigIssue:
    line: int
    key: str
    reason: str

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line > 0 else "config"
        return f"{where}: {self.key}: {self.reason}"


class ConfigError(NsfError):
    """
    Raised by :func:`nsf.config.parse_config`. Carries every problem found in
    the input, not only the first one.
    """

    exit_code = EXIT_CONFIG

    def __init__(self, issues: list[ConfigIssue]):
        self.issues = issues
        super().__init__("invalid configuration:\n" + "\n".join(f"  {i}" for i in issues))

    def __reduce__(self) -> tuple:
        return type(self), (self.issues,)


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class RangeError(ConfigError):
    pass


@dataclass
class RepairTotals:
    """Amounts added or removed by positivity repair, summed over cells."""

    mass: float = 0.0
    thermal: float = 0.0
    momentum: float = 0.0
    cells: int = 0

    def __iadd__(self, other: "RepairTotals") -> "RepairTotals":
        self.mass += other.mass
        self.thermal += other.thermal
        self.momentum += other.momentum
        self.cells += other.cells
        return self


def fsum(values: np.ndarray) -> float:
    """Compensated sum of all array entries, independent of memory layout."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def smootherstep(s: np.ndarray | float) -> np.ndarray:
    """
    Quintic ramp ``6s^5 - 15s^4 + 10s^3`` on ``[0, 1]``, clamped outside. Its
    first and second derivatives vanish at both ends.
    """
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def parse_float_list(text: str) -> tuple[float, ...]:
    """Parse ``"1e-1, 1e-2"`` into floats, accepting commas and whitespace."""
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    return tuple(float(p) for p in parts)


#: ANSI escape sequences, removed from log files.
ANSI_ESCAPE = re.compile(r"(\x9B|\x1B\[)[0-?]*[ -\/]*[@-~]")


def get_stream_formatter() -> logging.Formatter:
    """
    One-line console records, coloured by level when colorlog is installed.
    Continuation lines of multi-line messages are indented under the message.
    """
    try:
        import colorlog
    except ImportError:
        base: type[logging.Formatter] = logging.Formatter
        fmt = "[%(levelname).1s] %(name)s: %(message)s"
        extra: dict = {}
    else:
        base = colorlog.ColoredFormatter
        fmt = "%(log_color)s[%(levelname).1s]%(reset)s %(cyan)s%(name)s%(reset)s: %(message_log_color)s%(message)s"
        extra = {
            "log_colors": {
                "DEBUG": "blue",
                "INFO": "green",
                "WARNING": "yellow",
                "ERROR": "red",
                "CRITICAL": "white,bg_red",
            },
            "secondary_log_colors": {"message": {"WARNING": "yellow", "ERROR": "red", "CRITICAL": "bold_red"}},
        }

    class ConsoleFormatter(base):  # type: ignore[valid-type, misc]
        def format(self, record: logging.LogRecord) -> str:
            first, *rest = super().format(record).split("\n")
            return "\n".join([first] + ["    " + line for line in rest])

    return ConsoleFormatter(fmt=fmt, **extra)


def get_file_formatter() -> logging.Formatter:
    """Timestamped records with their origin, without colour codes."""

    class PlainFormatter(logging.Formatter):
        def format(self, record: logging.LogRecord) -> str:
            return ANSI_ESCAPE.sub("", super().format(record))

    return PlainFormatter(fmt="%(asctime)s %(levelname)-8s %(name)s (%(module)s:%(lineno)d) %(message)s")
