import os
import argparse
import logging

from dataclasses import dataclass

from ..command import Command
from ..config import CaseConfig, Registry
from ..context import Context, ContextPaths
from ..diagnostics import COLUMNS, SCHEMA, Gate
from ..output import CsvSeries, write_csv, write_snapshot
from ..solver import FieldState
from ..util import BlowUp, GateFailure

SUMMARY_SCHEMA = "nsf-summary v1"
SUMMARY_COLUMNS = ("gate", "value", "limit", "passed")

log = logging.getLogger("nsf.run")


@dataclass
class CaseOutcome:
    """What a finished case leaves behind besides its files."""

    name: str
    t: float
    steps: int
    final: dict[str, float]
    gates: list[Gate]

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)

    @property
    def failed_gates(self) -> list[str]:
        return [g.name for g in self.gates if not g.passed]


def run_case(cfg: CaseConfig, paths: ContextPaths, registry: Registry | None = None) -> CaseOutcome:
    """
    Runs one case and writes ``diagnostics.csv``, ``summary.csv`` and VTK
    snapshots below ``paths.output``. Snapshots are written for the initial
    and final state, and for every diagnostics row when the case enables
    ``snapshots``. A blow-up leaves the rows written so far in place.
    """
    solver = cfg.build_solver(registry)
    os.makedirs(paths.output, exist_ok=True)
    written: list[str] = []

    def snapshot(state: FieldState, t: float) -> None:
        path = os.path.join(paths.snapshots, f"{cfg.name}_{len(written):04d}.vtk")
        write_snapshot(path, solver, state, t)
        written.append(path)

    with CsvSeries(paths.diagnostics, SCHEMA, COLUMNS) as series:
        rows = 0

        def on_row(row: dict[str, float], state: FieldState, t: float) -> None:
            nonlocal rows
            series.write(row)
            rows += 1
            if cfg.snapshots or rows == 1:
                snapshot(state, t)

        try:
            result = solver.run(cfg.initial, on_row=on_row)
        except BlowUp as e:
            log.error(f"case {cfg.name} blew up after {rows} diagnostics rows: {e}")
            raise

    if result.steps > 0 and not cfg.snapshots:
        snapshot(result.state, result.t)
    log.debug(f"wrote {len(written)} snapshots to {paths.snapshots}")

    write_csv(
        paths.summary,
        SUMMARY_SCHEMA,
        SUMMARY_COLUMNS,
        (
            {"gate": g.name, "value": g.value, "limit": g.limit, "passed": "pass" if g.passed else "fail"}
            for g in result.gates
        ),
    )
    return CaseOutcome(cfg.name, result.t, result.steps, result.rows[-1], list(result.gates))


class RunCommand(Command):
    @property
    def name(self) -> str:
        return "run"

    @property
    def description(self) -> str:
        return "run a single case and write its diagnostics and snapshots"

    def add_args(self, parser: argparse.ArgumentParser) -> None:
        self.add_config_arg(parser)
        self.add_output_args(parser)

    def run(self, ctx: Context) -> None:
        cfg = self.load_case(ctx)
        paths = ctx.open_output(ctx.args.output_dir or cfg.output_dir)
        ctx.log.info(f"running case {cfg.name} ({cfg.dim}-D, {cfg.cells} cells per axis) into {paths.output}")

        outcome = run_case(cfg, paths, self.registry)

        ctx.log.info(
            f"case {cfg.name} finished at t={outcome.t:.6g} after {outcome.steps} steps, "
            f"total mass {outcome.final['total_mass']:.12g}"
        )
        for gate in outcome.gates:
            status = "passed" if gate.passed else "FAILED"
            ctx.log.info(f"{gate.name} gate {status}: {gate.value:.3e} (limit {gate.limit:.3e})")
        if not outcome.passed:
            raise GateFailure(f"case {cfg.name} failed gates: {', '.join(outcome.failed_gates)}")
