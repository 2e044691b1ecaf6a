import os
import csv
import sys
import math
import argparse

from itertools import chain
from contextlib import redirect_stdout
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from ..command import Command
from ..context import Context
from ..diagnostics import SCHEMA as DIAGNOSTICS_SCHEMA
from ..output import read_csv
from ..util import FatalError, ResultDict, ResultVal

Aggregator = Callable[[Sequence[Any]], Any]


def _same(values: Sequence[Any]) -> Any:
    distinct = set(values)
    if len(distinct) > 1:
        raise FatalError(f"'same' column has {len(distinct)} distinct values: {sorted(distinct)}")
    return values[0]


def _median_absolute_deviation(values: Sequence[float]) -> float:
    x = np.asarray(values, dtype=float)
    return float(np.median(np.abs(x - np.median(x))))


#: Reductions available to ``--column NAME:AGGR`` and ``--aggregate``.
AGGREGATORS: dict[str, Aggregator] = {
    "mean": lambda v: float(np.mean(v)),
    "median": lambda v: float(np.median(v)),
    "stdev": lambda v: float(np.std(v)),
    "stdev_percent": lambda v: float(100 * np.std(v) / np.mean(v)),
    "variance": lambda v: float(np.var(v)),
    "mad": _median_absolute_deviation,
    "min": min,
    "max": max,
    "absmax": lambda v: max(abs(x) for x in v),
    "sum": math.fsum,
    "count": len,
    "same": _same,
    "first": lambda v: v[0],
    "last": lambda v: v[-1],
    "drift": lambda v: v[-1] - v[0],
    "geomean": lambda v: float(np.exp(np.mean(np.log(v)))),
}

#: Columns shown for each known series when ``--column`` is not given.
default_columns: dict[str, tuple[str, ...]] = {
    DIAGNOSTICS_SCHEMA: (
        "t",
        "total_mass",
        "energy_residual",
        "thermal_residual",
        "penalty_integral",
        "solid_mass",
        "min_theta",
    ),
}

ColumnAggregators = Iterable[tuple[str, tuple[str, ...]]]


class ReportCommand(Command):
    @property
    def name(self) -> str:
        return "report"

    @property
    def description(self) -> str:
        return "tabulate diagnostics, summary or sweep files"

    def add_args(self, parser: argparse.ArgumentParser) -> None:
        filesarg = parser.add_argument(
            "files",
            nargs="+",
            metavar="CSV",
            help="diagnostics.csv, summary.csv or sweep.csv files written by run/sweep",
        )
        add_table_report_args(parser)
        parser.add_argument(
            "-c",
            "--column",
            nargs="+",
            action="append",
            metavar="COLUMN[:AGGR...]",
            default=[],
            help="""
            add reported column, followed by aggregation methods separated by
            colons; with aggregations, each file is reduced to one row.
            Valid aggregations are
            mean|median|stdev|stdev_percent|variance|mad|min|max|absmax|
            sum|count|same|first|last|drift|geomean""",
        )
        parser.add_argument(
            "--aggregate",
            choices=AGGREGATORS,
            help="aggregation method for entire columns, appended as a footer row",
        )
        try:
            from argcomplete.completers import FilesCompleter

            setattr(filesarg, "completer", FilesCompleter(allowednames=("csv",)))
        except ImportError:
            pass

    def run(self, ctx: Context) -> None:
        series = [load_series(path) for path in ctx.args.files]
        columns = list(self._parse_columns(ctx, series))
        aggregated = any(aggr for _, aggr in columns)
        if aggregated and not all(aggr for _, aggr in columns):
            raise FatalError("either every column or no column needs aggregation methods")

        if aggregated:
            header, human_header, data = self.aggregate_rows(series, columns)
            title = "aggregated " + ", ".join(s.schema for s in _unique_schemas(series))
        else:
            header, human_header, data = self.raw_rows(series, [c for c, _ in columns])
            title = ", ".join(s.schema for s in _unique_schemas(series))

        table_options: dict[str, bool] = {}
        if ctx.args.aggregate:
            aggrfn = AGGREGATORS[ctx.args.aggregate]

            def try_aggr(values: Sequence[Any]) -> Any:
                numbers = [v for v in values if isinstance(v, (int, float)) and not isinstance(v, bool)]
                if not numbers:
                    return None
                try:
                    return aggrfn(numbers)
                except Exception:
                    return None

            footer = [try_aggr(c) for c in zip(*data)]
            footer[0] = ctx.args.aggregate
            data.append(footer)
            table_options["inner_footing_row_border"] = True

        report_table(ctx, header, human_header, data, title, **table_options)

    def raw_rows(
        self, series: Sequence["Series"], columns: Sequence[str]
    ) -> tuple[list[str], list[str], list[list[ResultVal | None]]]:
        header = ["file"] + list(columns)
        data: list[list[ResultVal | None]] = []
        for s in series:
            for row in s.rows:
                data.append([s.label] + [row.get(c) for c in columns])
        return header, header, data

    def aggregate_rows(
        self, series: Sequence["Series"], columns: ColumnAggregators
    ) -> tuple[list[str], list[str], list[list[ResultVal | None]]]:
        columns = list(columns)
        header = ["file"]
        human_header = ["\nfile"]
        for c, aggr in columns:
            for ag in aggr:
                header.append(f"{c}_{ag}")
                human_header.append(f"{c}\n{ag}")

        data: list[list[ResultVal | None]] = []
        for s in series:
            row: list[ResultVal | None] = [s.label]
            for c, aggr in columns:
                values = [r[c] for r in s.rows if isinstance(r.get(c), (int, float))]
                for ag in aggr:
                    row.append(AGGREGATORS[ag](values) if values else None)
            data.append(row)
        return header, human_header, data

    def _parse_columns(self, ctx: Context, series: Sequence["Series"]) -> ColumnAggregators:
        known = set(chain.from_iterable(s.header for s in series))
        if not ctx.args.column:
            for c in _default_columns(series):
                yield c, ()
            return

        for arg in chain.from_iterable(ctx.args.column):
            column, *aggr = arg.split(":")
            if column not in known:
                raise FatalError(f"unknown column '{column}'")
            for ag in aggr:
                if ag not in AGGREGATORS:
                    raise FatalError(f"unknown aggregator '{ag}' for {column}")
            yield column, tuple(aggr)


class Series:
    """A parsed CSV file written by this package."""

    def __init__(self, path: str, schema: str, header: list[str], rows: list[ResultDict]):
        self.path = path
        self.schema = schema
        self.header = header
        self.rows = rows

    @property
    def label(self) -> str:
        return _strip_cwd(self.path)


def load_series(path: str) -> Series:
    schema, header, raw = read_csv(path)
    if not schema.startswith("nsf-"):
        raise FatalError(f"{path}: not an nsf file (schema '{schema}')")
    rows = []
    for lineno, values in enumerate(raw, start=3):
        if len(values) != len(header):
            raise FatalError(f"{path}:{lineno}: expected {len(header)} values, got {len(values)}")
        rows.append({k: _unbox_value(v) for k, v in zip(header, values)})
    return Series(path, schema, header, rows)


def _unique_schemas(series: Sequence[Series]) -> list[Series]:
    seen: dict[str, Series] = {}
    for s in series:
        seen.setdefault(s.schema, s)
    return list(seen.values())


def _default_columns(series: Sequence[Series]) -> Iterator[str]:
    seen: set[str] = set()
    for s in series:
        for c in default_columns.get(s.schema, s.header):
            if c not in seen:
                seen.add(c)
                yield c


def add_table_report_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "-o",
        "--outfile",
        type=argparse.FileType("w"),
        default=sys.stdout,
        help="outfile (default: stdout)",
    )
    can_fancy = getattr(sys.stdout, "encoding", None) == "UTF-8" and getattr(sys.stdout, "name", None) == "<stdout>"
    parser.add_argument(
        "--table",
        choices=("fancy", "ascii", "csv", "tsv", "ssv"),
        default="fancy" if can_fancy else "ascii",
        help="output mode for tables: UTF-8 formatted / ASCII tables / {comma,tab,space}-separated",
    )
    parser.add_argument(
        "--precision",
        type=int,
        default=3,
        help="significant digits to round numbers to",
    )

    quickset_group = parser.add_mutually_exclusive_group()
    for mode in ("ascii", "csv", "tsv", "ssv"):
        quickset_group.add_argument(
            "--" + mode,
            action="store_const",
            const=mode,
            dest="table",
            help="short for --table=" + mode,
        )


def report_table(
    ctx: Context,
    nonhuman_header: list[str],
    human_header: list[str],
    data_rows: Iterable[Iterable[ResultVal | None]],
    title: str,
    **table_options: bool,
) -> None:
    # don't align numbers for non-human reporting
    if ctx.args.table in ("csv", "tsv", "ssv"):
        data_rows = [[_to_string(ctx, v) for v in row] for row in data_rows]

        delim = {"csv": ",", "tsv": "\t", "ssv": " "}[ctx.args.table]
        with redirect_stdout(ctx.args.outfile):
            writer = csv.writer(sys.stdout, quoting=csv.QUOTE_MINIMAL, delimiter=delim, lineterminator="\n")
            writer.writerow(nonhuman_header)
            for row in data_rows:
                writer.writerow(row)
        return

    data_rows = [list(row) for row in data_rows]

    # align numbers on the decimal point
    def whole_digits(s: str) -> int:
        dot = s.find(".")
        return len(s) if dot == -1 else dot

    strings = [[_to_string(ctx, v) for v in row] for row in data_rows]
    widths = [
        max((whole_digits(s) for s, v in zip(col, vals) if _is_number(v)), default=0)
        for col, vals in zip(zip(*strings), zip(*data_rows))
    ]

    def pad(s: str, v: ResultVal | None, col: int) -> str:
        if _is_number(v) and "e" not in s:
            return " " * (widths[col] - whole_digits(s)) + s
        return s

    rows = [[pad(s, v, col) for col, (s, v) in enumerate(zip(srow, vrow))] for srow, vrow in zip(strings, data_rows)]

    from terminaltables import AsciiTable, SingleTable

    Table = SingleTable if ctx.args.table == "fancy" else AsciiTable
    table = Table([human_header] + rows, f" {title} ")
    table.inner_column_border = False
    table.padding_left = 0

    for kw, val in table_options.items():
        setattr(table, kw, val)

    with redirect_stdout(ctx.args.outfile):
        print(table.table)


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _to_string(ctx: Context, n: Any) -> str:
    if n is None:
        return "-"
    if isinstance(n, bool):
        return "yes" if n else "no"
    if isinstance(n, float):
        return _precise_float(n, ctx.args.precision)
    return str(n)


def _precise_float(n: float, precision: int) -> str:
    """
    ``precision`` significant digits in fixed notation, never dropping digits
    left of the point; magnitudes outside ``[1e-4, 1e9)`` use scientific
    notation.

    >>> _precise_float(0.02, 3)
    '0.0200'
    >>> _precise_float(98765.4, 3)
    '98765'
    >>> _precise_float(-2.5e-13, 3)
    '-2.50e-13'
    >>> _precise_float(0.0, 3)
    '0'
    """
    if not math.isfinite(n):
        return str(n)
    if n == 0:
        return "0"
    if abs(n) < 1e-4 or abs(n) >= 1e9:
        return "%.*e" % (max(precision - 1, 0), n)
    decimals = precision - 1 - math.floor(math.log10(abs(n)))
    return "%.*f" % (max(decimals, 0), n)


def _unbox_value(value: str) -> ResultVal | None:
    if value in ("", "-"):
        return None
    if value.lstrip("-").isdigit():
        return int(value)
    try:
        return float(value)
    except ValueError:
        pass
    return value


def _strip_cwd(path: str) -> str:
    cwd = os.path.join(os.getcwd(), "")
    path = os.path.abspath(path)
    return path[len(cwd) :] if path.startswith(cwd) else path
