import os
import sys
import logging
import argparse
import datetime
import traceback

from typing import Type

from . import commands
from .command import Command
from .config import Registry
from .context import Context, ContextPaths, default_jobs
from .field import VelocityField
from .law import Law
from .shape import ReferenceShape
from .util import EXIT_FATAL, EXIT_OK, FatalError, Index, get_stream_formatter


class Setup:
    """
    Defines the simulator commands.

    The setup takes care of command-line parsing, logging, parallelism and
    output paths. It comes populated with the built-in velocity fields,
    reference shapes and constitutive laws; custom ones are registered with
    :func:`add_field`, :func:`add_shape` and :func:`add_law` before calling
    :func:`main`, after which case files can refer to them by name:

    .. _setup-example:

    ::

        setup = nsf.Setup()
        setup.add_field(MyOscillatingField)
        sys.exit(setup.main())

    :func:`main` creates a :class:`context <context.Context>` that it passes
    to the command being run. The context holds the parsed arguments, the
    logger and the output paths of the case.
    """

    ctx: Context
    registry: Registry
    commands: Index[Command]

    def __init__(self) -> None:
        self.registry = Registry.builtin()
        self.commands = Index("command")

        logger = logging.getLogger("nsf")
        workdir = os.getcwd()
        self.ctx = Context(ContextPaths(workdir, workdir), logger)

    def _parse_argv(self, argv: list[str] | None) -> None:
        parser = argparse.ArgumentParser(
            prog="nsf",
            description="Penalized Navier-Stokes-Fourier simulator on moving domains",
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )

        # global options
        parser.add_argument(
            "-v",
            "--verbosity",
            default="info",
            choices=["critical", "error", "warning", "info", "debug"],
            help="Set logging verbosity",
        )
        parser.add_argument(
            "-j",
            "--jobs",
            type=int,
            default=self.ctx.jobs,
            help="Maximum number of sweep workers; capped by NSF_THREADS",
        )

        subparsers = parser.add_subparsers(
            title="commands",
            metavar="COMMAND",
            dest="command",
            description="each command has its own --help",
            required=True,
        )

        for name, command in self.commands.items():
            subparser = subparsers.add_parser(
                name=name,
                help=command.description,
                formatter_class=argparse.ArgumentDefaultsHelpFormatter,
            )
            command.add_args(subparser)

        self._enable_completion(parser)
        self.ctx.args = parser.parse_args(argv)
        self.ctx.jobs = max(1, min(self.ctx.args.jobs, default_jobs()))
        self.ctx.deterministic = getattr(self.ctx.args, "deterministic", False)
        if self.ctx.deterministic:
            self.ctx.jobs = 1

    @staticmethod
    def _enable_completion(parser: argparse.ArgumentParser) -> None:
        try:
            import argcomplete
        except ImportError:
            return
        argcomplete.autocomplete(parser, exclude=["-h", "--help"])

    def _initialize_logger(self) -> None:
        log = self.ctx.log
        self.ctx.loglevel = logging.getLevelName(self.ctx.args.verbosity.upper())
        log.setLevel(logging.DEBUG)
        log.propagate = False
        self._finalize_logger()

        # the DEBUG file handler is added by the command once its output directory exists
        console = logging.StreamHandler(stream=sys.stdout)
        console.setLevel(self.ctx.loglevel)
        console.setFormatter(get_stream_formatter())
        log.addHandler(console)

    def _finalize_logger(self) -> None:
        for handler in list(self.ctx.log.handlers):
            self.ctx.log.removeHandler(handler)
            handler.close()

    def add_command(self, command: Command) -> None:
        """Make ``command`` available as a sub-command, sharing the plug-in registry."""
        self.commands[command.name] = command
        command.registry = self.registry

    @staticmethod
    def _register(index: Index, plugin: type, key: str) -> None:
        name = getattr(plugin, key, None)
        if not isinstance(name, str):
            raise TypeError(f"{plugin.__name__}.{key} must be a string")
        index[name] = plugin

    def add_field(self, field: Type[VelocityField]) -> None:
        """Register a velocity field class under its ``name``."""
        self._register(self.registry.fields, field, "name")

    def add_shape(self, shape: Type[ReferenceShape]) -> None:
        """Register a reference shape class under its ``name``."""
        self._register(self.registry.shapes, shape, "name")

    def add_law(self, law: Type[Law]) -> None:
        """Register a constitutive law class under its ``kind``, the first token of a law value."""
        self._register(self.registry.laws, law, "kind")

    def _run_command(self) -> int:
        command = self.commands[self.ctx.args.command]
        try:
            command.run(self.ctx)
        except FatalError as e:
            self.ctx.log.error(str(e))
            return e.exit_code
        except KeyboardInterrupt:
            self.ctx.log.warning(f"{command.name} interrupted")
            return EXIT_FATAL
        except Exception:
            self.ctx.log.critical(f"{command.name} crashed:\n" + traceback.format_exc().rstrip())
            return EXIT_FATAL
        return EXIT_OK

    def main(self, argv: list[str] | None = None) -> int:
        """
        Parse ``argv`` (default: ``sys.argv[1:]``), set up console logging and
        run the selected command.

        :returns: the process exit code: 0 on success, 2 when a gate fails,
                  3 on blow-up, 4 for invalid configurations and 1 otherwise
        """
        self.ctx.starttime = datetime.datetime.now()
        for command in (
            commands.RunCommand(),
            commands.SweepCommand(),
            commands.ValidateCommand(),
            commands.ReportCommand(),
        ):
            if command.name not in self.commands:
                self.add_command(command)

        self._parse_argv(argv)
        self._initialize_logger()
        code = self._run_command()
        elapsed = datetime.datetime.now() - self.ctx.starttime
        self.ctx.log.debug(f"{self.ctx.args.command} finished with exit code {code} after {elapsed}")
        self._finalize_logger()
        return code


def main() -> None:
    sys.exit(Setup().main())
