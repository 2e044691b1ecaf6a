import argparse
import logging

from dataclasses import dataclass, field, replace

from ..command import Command
from ..config import SWEEP_PARAMS, CaseConfig, Registry, SweepSpec
from ..context import Context, ContextPaths
from ..diagnostics import convergence_rate
from ..output import write_csv
from ..parallel import Job
from ..util import BadConfig, DegenerateSamples, FatalError, GateFailure, ResultVal, parse_float_list
from .report import add_table_report_args, report_table
from .run import run_case

SWEEP_SCHEMA = "nsf-sweep v1"
RATES_SCHEMA = "nsf-sweep-rates v1"

#: Final-row diagnostics whose decay in the swept parameter is measured.
SWEEP_METRICS: dict[str, tuple[str, ...]] = {
    "eps": ("penalty_integral", "solid_mass"),
    "omega": ("solid_viscous_integral",),
    "nu": ("solid_conduction_integral",),
    "xi": ("mask_defect",),
    "delta": ("artificial_energy",),
}

log = logging.getLogger("nsf.sweep")


@dataclass
class Member:
    index: int
    value: float
    cfg: CaseConfig
    status: str = "pending"
    final: dict[str, float] = field(default_factory=dict)
    gates: str = "-"
    error: str = ""

    @property
    def dirname(self) -> str:
        return f"member-{self.index:02d}"


@dataclass
class Rate:
    metric: str
    slope: float | None
    min_slope: float
    decreasing: bool
    passed: bool


def sweep_values(values: tuple[float, ...]) -> tuple[float, ...]:
    """Checks that ``values`` can be fitted: at least three, distinct, strictly decreasing."""
    if len(values) < 3:
        raise DegenerateSamples(f"a sweep needs at least 3 values, got {len(values)}")
    if len(set(values)) != len(values):
        raise DegenerateSamples(f"sweep values must be distinct, got {', '.join(map(repr, values))}")
    if any(not v > 0 for v in values):
        raise BadConfig("sweep values must be positive")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise BadConfig("sweep values must be strictly decreasing")
    return values


def member_config(cfg: CaseConfig, param: str, value: float, couple_nu_delta: bool) -> CaseConfig:
    changes = {param: value}
    if param == "delta" and couple_nu_delta:
        changes["nu"] = value * value
    return cfg.with_penalty(**changes)


def run_member(cfg: CaseConfig, paths: ContextPaths, registry: Registry) -> tuple[dict[str, float], bool]:
    """Worker entry point; must stay importable at module level for process pools."""
    outcome = run_case(cfg, paths, registry)
    return outcome.final, outcome.passed


def measure_rates(spec: SweepSpec, members: list[Member]) -> list[Rate]:
    """
    Fits the log-log slope of every metric of the swept parameter over the
    completed members. A metric that vanishes for every member passes
    without a slope; otherwise it must decrease strictly along the sweep and
    decay at least with ``spec.min_slope``.
    """
    done = [m for m in members if m.status == "completed"]
    rates = []
    for metric in SWEEP_METRICS[spec.param]:
        samples = [(m.value, m.final[metric]) for m in done]
        if samples and all(v == 0 for _, v in samples):
            rates.append(Rate(metric, None, spec.min_slope, True, True))
            continue
        decreasing = all(b < a for (_, a), (_, b) in zip(samples, samples[1:]))
        try:
            slope: float | None = convergence_rate(samples)
        except DegenerateSamples as e:
            log.warning(f"cannot fit {metric}: {e}")
            slope = None
        passed = slope is not None and slope >= spec.min_slope and decreasing and len(done) == len(members)
        rates.append(Rate(metric, slope, spec.min_slope, decreasing, passed))
    return rates


class SweepCommand(Command):
    @property
    def name(self) -> str:
        return "sweep"

    @property
    def description(self) -> str:
        return "run a case for a decreasing sequence of one penalty parameter and fit decay rates"

    def add_args(self, parser: argparse.ArgumentParser) -> None:
        self.add_config_arg(parser)
        paramarg = parser.add_argument(
            "--param",
            choices=SWEEP_PARAMS,
            default=None,
            help="penalty parameter to sweep (default: [sweep] param of the case file)",
        )
        setattr(paramarg, "completer", self.complete_sweep_param)
        parser.add_argument(
            "--values",
            type=parse_float_list,
            default=None,
            metavar="V1,V2,...",
            help="strictly decreasing parameter values (default: [sweep] values of the case file)",
        )
        parser.add_argument(
            "--couple-nu-delta",
            action="store_true",
            help="slave nu to delta^2 when sweeping delta",
        )
        self.add_output_args(parser)
        self.add_pool_args(parser)
        add_table_report_args(parser)

    def sweep_spec(self, ctx: Context, cfg: CaseConfig) -> SweepSpec:
        spec = cfg.sweep or SweepSpec()
        a = ctx.args
        spec = replace(
            spec,
            param=a.param or spec.param,
            values=a.values if a.values is not None else spec.values,
            couple_nu_delta=a.couple_nu_delta or spec.couple_nu_delta,
        )
        if spec.param not in SWEEP_PARAMS:
            raise BadConfig(f"cannot sweep '{spec.param}', choose one of {', '.join(SWEEP_PARAMS)}")
        sweep_values(spec.values)
        return spec

    def run(self, ctx: Context) -> None:
        ctx.deterministic = ctx.args.deterministic
        cfg = self.load_case(ctx)
        spec = self.sweep_spec(ctx, cfg)
        pool = self.make_pool(ctx)
        paths = ctx.open_output(ctx.args.output_dir or cfg.output_dir)
        ctx.log.info(
            f"sweeping {spec.param} over {', '.join(map(repr, spec.values))} for case {cfg.name}"
            + (" with nu = delta^2" if spec.param == "delta" and spec.couple_nu_delta else "")
        )

        members = [
            Member(i, v, member_config(cfg, spec.param, v, spec.couple_nu_delta)) for i, v in enumerate(spec.values)
        ]

        def onsuccess(job: Job) -> None:
            member = members[int(job.jobid)]
            member.final, passed = job.result
            member.status = "completed"
            member.gates = "pass" if passed else "fail"
            ctx.log.info(f"{spec.param}={member.value!r} completed")

        def onerror(job: Job) -> None:
            member = members[int(job.jobid)]
            member.status = "failed"
            member.error = str(job.error)
            if not isinstance(job.error, FatalError):
                ctx.log.debug(f"member {member.dirname} raised {type(job.error).__name__}")

        for member in members:
            pool.submit(
                str(member.index),
                run_member,
                member.cfg,
                paths.member(member.dirname),
                self.registry,
                onsuccess=onsuccess,
                onerror=onerror,
            )
        pool.wait_all()

        rates = measure_rates(spec, members)
        self.write_reports(paths, spec, members, rates)
        self.print_report(ctx, spec, members, rates)

        failed = [m.dirname for m in members if m.status == "failed"]
        if failed:
            raise GateFailure(f"sweep incomplete, failed members: {', '.join(failed)}")
        below = [r.metric for r in rates if not r.passed]
        if below:
            raise GateFailure(f"sweep thresholds not met for {', '.join(below)}")

    def write_reports(self, paths: ContextPaths, spec: SweepSpec, members: list[Member], rates: list[Rate]) -> None:
        metrics = SWEEP_METRICS[spec.param]
        columns = ("param", "value", "nu", "status", "gates") + metrics + ("total_mass", "t", "error")
        rows = []
        for m in members:
            row: dict[str, float | str] = {
                "param": spec.param,
                "value": m.value,
                "nu": m.cfg.penalty.nu,
                "status": m.status,
                "gates": m.gates,
                "error": m.error,
            }
            for c in metrics + ("total_mass", "t"):
                row[c] = m.final.get(c, "-")
            rows.append(row)
        write_csv(paths.sweep_report, SWEEP_SCHEMA, columns, rows)

        write_csv(
            paths.rates,
            RATES_SCHEMA,
            ("metric", "slope", "min_slope", "decreasing", "passed"),
            (
                {
                    "metric": r.metric,
                    "slope": "-" if r.slope is None else r.slope,
                    "min_slope": r.min_slope,
                    "decreasing": "yes" if r.decreasing else "no",
                    "passed": "pass" if r.passed else "fail",
                }
                for r in rates
            ),
        )

    def print_report(self, ctx: Context, spec: SweepSpec, members: list[Member], rates: list[Rate]) -> None:
        metrics = SWEEP_METRICS[spec.param]
        header = [spec.param, "status"] + list(metrics)
        data: list[list[ResultVal | None]] = [
            [m.value, m.status] + [m.final.get(c) for c in metrics] for m in members
        ]
        data.append(["slope", "-"] + [r.slope for r in rates])
        report_table(ctx, header, header, data, f"{spec.param} sweep of {members[0].cfg.name}")
        for r in rates:
            slope = "-" if r.slope is None else f"{r.slope:.3f}"
            status = "passed" if r.passed else "FAILED"
            ctx.log.info(f"{r.metric}: slope {slope} (threshold {r.min_slope}) {status}")
