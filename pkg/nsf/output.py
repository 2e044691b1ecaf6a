import os
import csv
import logging

from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .geometry import mask_chi_nu_xi
from .solver import FieldState, Solver
from .util import IoError

log = logging.getLogger("nsf.output")


def format_value(value: float | int | str) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


class CsvSeries:
    """
    Writes rows to a CSV file whose first line is the ``# <schema>`` version
    tag and whose second line is the header. Rows are flushed as they are
    written so that a crashed run keeps everything up to the crash.

    :param path: output file, parent directories are created
    :param schema: version tag, e.g. ``nsf-diagnostics v1``
    :param columns: header
    """

    def __init__(self, path: str, schema: str, columns: Sequence[str]):
        self.path = path
        self.columns = list(columns)
        try:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            self.file: IO[str] = open(path, "w", newline="")
        except OSError as e:
            raise IoError(f"cannot write {path}: {e.strerror}")
        self.writer = csv.writer(self.file, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        self.file.write(f"# {schema}\n")
        self.writer.writerow(self.columns)

    def write(self, row: Mapping[str, float | int | str]) -> None:
        self.writer.writerow([format_value(row[c]) for c in self.columns])
        self.file.flush()

    def close(self) -> None:
        self.file.close()

    def __enter__(self) -> "CsvSeries":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def write_csv(
    path: str, schema: str, columns: Sequence[str], rows: Iterable[Mapping[str, float | int | str]]
) -> None:
    with CsvSeries(path, schema, columns) as series:
        for row in rows:
            series.write(row)


def read_csv(path: str) -> tuple[str, list[str], list[list[str]]]:
    """Returns the schema tag, the header and the raw rows of a series file."""
    try:
        with open(path, newline="") as f:
            first = f.readline().strip()
            if not first.startswith("#"):
                raise IoError(f"{path}: missing schema line")
            reader = csv.reader(f)
            header = next(reader, [])
            return first.lstrip("# ").strip(), header, [row for row in reader if row]
    except OSError as e:
        raise IoError(f"cannot read {path}: {e.strerror}")


def _cell_values(values: np.ndarray) -> Iterator[str]:
    # legacy VTK expects x to vary fastest
    for v in np.asarray(values, dtype=float).ravel(order="F"):
        yield "%.9g" % v


def write_snapshot(path: str, solver: Solver, state: FieldState, t: float) -> None:
    """
    Writes cell fields ``rho``, ``u``, ``theta``, ``phi`` and ``chi`` to a
    legacy ASCII VTK ``STRUCTURED_POINTS`` file. Point coordinates follow
    from the header; 2-D grids are written as a single layer of cells.
    """
    grid = solver.grid
    prim = solver.primitives(state, t)
    pen = solver.penalty
    dim, n, h = grid.dim, grid.cells, grid.h

    dims = [n + 1] * dim + [1] * (3 - dim)
    origin = [-grid.half_width] * dim + [0.0] * (3 - dim)
    spacing = [h] * 3
    cells = n**dim

    lines = [
        "# vtk DataFile Version 3.0",
        f"nsf snapshot t={t!r}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS %d %d %d" % tuple(dims),
        "ORIGIN %.17g %.17g %.17g" % tuple(origin),
        "SPACING %.17g %.17g %.17g" % tuple(spacing),
        f"CELL_DATA {cells}",
    ]

    def scalars(name: str, values: np.ndarray) -> None:
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_cell_values(values))

    scalars("rho", prim.rho)
    u = [prim.u[i] for i in range(dim)] + [np.zeros(grid.shape)] * (3 - dim)
    lines.append("VECTORS u double")
    for ux, uy, uz in zip(*(np.ravel(c, order="F") for c in u)):
        lines.append("%.9g %.9g %.9g" % (ux, uy, uz))
    scalars("theta", prim.theta)
    scalars("phi", prim.geometry.phi)
    scalars("chi", mask_chi_nu_xi(prim.geometry.phi, pen.nu, pen.xi))

    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e.strerror}")
    log.debug(f"wrote snapshot {path}")
