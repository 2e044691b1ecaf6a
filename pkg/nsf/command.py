import argparse

from abc import ABCMeta, abstractmethod
from argparse import ArgumentParser
from typing import Any, Iterator

from .config import CaseConfig, Registry, load_config
from .context import Context
from .parallel import Pool, ProcessPool, SequentialPool
from .util import FatalError


class Command(metaclass=ABCMeta):
    @property
    @abstractmethod
    def name(self) -> str:
        """Returns this command's name. Should be unique."""
        pass

    @property
    @abstractmethod
    def description(self) -> str:
        """Returns a description of this command's behaviour."""
        pass

    registry: Registry

    @abstractmethod
    def add_args(self, parser: ArgumentParser) -> None:
        pass

    @abstractmethod
    def run(self, ctx: Context) -> None:
        pass

    def add_config_arg(self, parser: ArgumentParser) -> None:
        parser.add_argument("config", metavar="CONFIG", help="case file (.nsf)")

    def add_output_args(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "--output-dir",
            metavar="DIR",
            default=None,
            help="directory receiving all outputs (default: output_dir of the case file)",
        )
        parser.add_argument(
            "--deterministic",
            action="store_true",
            help="single worker, byte-identical outputs across repeated runs",
        )

    def load_case(self, ctx: Context) -> CaseConfig:
        cfg = load_config(ctx.args.config, self.registry)
        ctx.log.debug(f"loaded case '{cfg.name}' from {ctx.args.config}")
        return cfg

    def add_pool_args(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument(
            "--parallel",
            choices=("proc", "none"),
            default="none",
            help='run sweep members in parallel ("proc" for local processes)',
        )
        parser.add_argument(
            "--parallelmax",
            metavar="PROCESSES",
            type=int,
            default=None,
            help="limit simultaneous worker processes (default: NSF_THREADS or the number of cores)",
        )

    def make_pool(self, ctx: Context) -> Pool:
        if ctx.args.parallel == "proc":
            if ctx.deterministic:
                raise FatalError("--parallel=proc not supported with --deterministic")
            pmax = ctx.jobs if ctx.args.parallelmax is None else ctx.args.parallelmax
            if pmax < 1:
                raise FatalError("--parallelmax must be at least 1")
            if pmax > ctx.jobs:
                ctx.log.warning(f"capping --parallelmax={pmax} to {ctx.jobs} workers (NSF_THREADS)")
                pmax = ctx.jobs
            return ProcessPool(ctx.log, pmax)

        if ctx.args.parallelmax:
            raise FatalError("--parallelmax not supported for --parallel=none")
        return SequentialPool(ctx.log)

    def complete_sweep_param(self, prefix: str, parsed_args: argparse.Namespace, **kwargs: Any) -> Iterator[str]:
        from .config import SWEEP_PARAMS

        for param in SWEEP_PARAMS:
            if param.startswith(prefix):
                yield param
