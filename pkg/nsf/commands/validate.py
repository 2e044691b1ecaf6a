import argparse

from ..command import Command
from ..constitutive import validate_hypotheses
from ..context import Context
from ..util import HypothesisViolation
from .report import add_table_report_args, report_table


class ValidateCommand(Command):
    @property
    def name(self) -> str:
        return "validate"

    @property
    def description(self) -> str:
        return "check the constitutive hypotheses of a case without running it"

    def add_args(self, parser: argparse.ArgumentParser) -> None:
        self.add_config_arg(parser)
        add_table_report_args(parser)

    def run(self, ctx: Context) -> None:
        cfg = self.load_case(ctx)
        report = validate_hypotheses(cfg.constitutive)

        header = ["hypothesis", "status", "detail"]
        data = [[c.name, "pass" if c.passed else "FAIL", c.detail] for c in report]
        data.append(["tightest c", "-", report.tightest_c])
        report_table(ctx, header, header, data, f"hypotheses of {cfg.name}")

        problems = cfg.penalty.problems(cfg.constitutive.gamma)
        for key, reason in problems:
            ctx.log.error(f"penalty parameter {key}: {reason}")

        if not report.passed or problems:
            names = [c.name for c in report.failures] + [key for key, _ in problems]
            raise HypothesisViolation(f"case {cfg.name} violates: {', '.join(names)}")
        ctx.log.info(f"all hypotheses of {cfg.name} hold")
