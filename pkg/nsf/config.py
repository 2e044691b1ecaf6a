import re
import logging
import dataclasses

from dataclasses import dataclass, replace
from typing import Any, Callable, Iterator, Type

from . import fields as builtin_fields
from . import laws as builtin_laws
from . import shapes as builtin_shapes
from .constitutive import ConstitutiveSet
from .field import VelocityField
from .geometry import MovingDomain, PenaltyParams
from .grid import MIN_CELLS, Grid
from .law import Law
from .shape import ReferenceShape
from .solver import InitialData, Solver, SolverConfig
from .util import (
    BadConfig,
    ConfigError,
    ConfigIssue,
    FatalError,
    Index,
    ParseError,
    RangeError,
    UnknownKey,
    parse_float_list,
)

log = logging.getLogger("nsf.config")

#: Parameters that can be swept, each naming a :class:`PenaltyParams` field.
SWEEP_PARAMS = ("eps", "omega", "nu", "xi", "delta")

Params = tuple[tuple[str, tuple[float, ...]], ...]


@dataclass
class Registry:
    """Name lookup for the plug-in classes a case file may refer to."""

    fields: Index[Type[VelocityField]]
    shapes: Index[Type[ReferenceShape]]
    laws: Index[Type[Law]]

    @classmethod
    def builtin(cls) -> "Registry":
        reg = cls(Index("velocity field"), Index("reference shape"), Index("law"))
        for f in builtin_fields.BUILTIN:
            reg.fields[f.name] = f
        for s in builtin_shapes.BUILTIN:
            reg.shapes[s.name] = s
        for law in builtin_laws.BUILTIN:
            reg.laws[law.kind] = law
        return reg

    def law(self, text: str) -> Law:
        kind, *tokens = text.split()
        return self.laws[kind].from_tokens(tokens)


@dataclass(frozen=True)
class SweepSpec:
    param: str = "eps"
    values: tuple[float, ...] = ()
    couple_nu_delta: bool = False
    min_slope: float = 0.8


@dataclass(frozen=True)
class CaseConfig:
    """A fully validated case file."""

    name: str = "case"
    output_dir: str = "out"
    seed: int = 0
    snapshots: bool = True
    dim: int = 2
    cells: int = 64
    field: str = "rest"
    field_params: Params = ()
    support_radius: float = 1.0
    shape: str = "disk"
    shape_params: Params = ()
    flow_step: float = 0.02
    constitutive: ConstitutiveSet = dataclasses.field(default_factory=ConstitutiveSet)
    penalty: PenaltyParams = dataclasses.field(default_factory=PenaltyParams)
    solver: SolverConfig = dataclasses.field(default_factory=SolverConfig)
    initial: InitialData = dataclasses.field(default_factory=InitialData)
    sweep: SweepSpec | None = None

    def with_penalty(self, **changes: float) -> "CaseConfig":
        return replace(self, penalty=replace(self.penalty, **changes))

    def build_domain(self, registry: Registry | None = None) -> MovingDomain:
        registry = registry or Registry.builtin()
        velocity = registry.fields[self.field](
            self.support_radius, self.dim, **dict(self.field_params)
        )
        shape = registry.shapes[self.shape](self.dim, **dict(self.shape_params))
        return MovingDomain(velocity, shape, self.flow_step)

    def build_solver(self, registry: Registry | None = None) -> Solver:
        domain = self.build_domain(registry)
        grid = Grid(self.dim, self.cells, domain.half_width)
        return Solver(grid, domain, self.constitutive, self.penalty, self.solver)


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _box(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_box(v) for v in value)
    return str(value)


Converter = Callable[[str], Any]

#: Keys of each section with their converters, in emission order.
SCHEMA: dict[str, list[tuple[str, Converter]]] = {
    "case": [("name", str), ("output_dir", str), ("seed", int), ("snapshots", _bool)],
    "grid": [("dim", int), ("cells", int)],
    "domain": [
        ("field", str),
        ("support_radius", float),
        ("shape", str),
        ("flow_step", float),
    ],
    "constitutive": [
        ("gamma", float),
        ("alpha", float),
        ("mu", float),
        ("eta", float),
        ("zeta", float),
        ("p_e", str),
        ("p_theta", str),
        ("c_v", str),
        ("kappa", str),
        ("a1", float),
        ("a2", float),
        ("b", float),
        ("k1", float),
        ("k2", float),
        ("c_lower", float),
        ("c_upper", float),
        ("c_theta", float),
        ("rho_vacuum", float),
    ],
    "penalty": [(key, float) for key in ("eps", "omega", "nu", "xi", "delta", "beta")],
    "solver": [
        ("end_time", float),
        ("cadence", float),
        ("cfl", float),
        ("flux", str),
        ("density_weighted", _bool),
        ("energy_tolerance", float),
        ("thermal_tolerance", float),
        ("override_hypotheses", _bool),
        ("time_centering", str),
        ("renorm_cutoff", float),
        ("dilute_density", float),
    ],
    "initial": [
        ("density", float),
        ("momentum", str),
        ("temperature", float),
        ("theta_lower", float),
        ("theta_upper", float),
        ("bump_amplitude", float),
        ("bump_width", float),
        ("bump_center", parse_float_list),
    ],
    "sweep": [
        ("param", str),
        ("values", parse_float_list),
        ("couple_nu_delta", _bool),
        ("min_slope", float),
    ],
}

_LAWS = ("p_e", "p_theta", "c_v", "kappa")
_section_re = re.compile(r"^\[([A-Za-z_]+)\]$")
_entry_re = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


class _Issues:
    def __init__(self) -> None:
        self.found: list[tuple[Type[ConfigError], ConfigIssue]] = []

    def add(self, kind: Type[ConfigError], line: int, key: str, reason: str) -> None:
        self.found.append((kind, ConfigIssue(line, key, reason)))

    def __bool__(self) -> bool:
        return bool(self.found)

    def raise_first(self) -> None:
        kind = self.found[0][0]
        raise kind([issue for _, issue in self.found])


@dataclass
class _Entry:
    line: int
    value: str


def _read_sections(text: str, issues: _Issues) -> dict[str, dict[str, _Entry]]:
    sections: dict[str, dict[str, _Entry]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _section_re.match(line)
        if match:
            current = match.group(1)
            if current not in SCHEMA:
                issues.add(UnknownKey, lineno, f"[{current}]", "unknown section")
            elif current in sections:
                issues.add(ParseError, lineno, f"[{current}]", "duplicate section")
            sections.setdefault(current, {})
            continue
        match = _entry_re.match(line)
        if not match:
            issues.add(ParseError, lineno, line, "expected 'key = value' or '[section]'")
            continue
        if current is None:
            issues.add(ParseError, lineno, match.group(1), "entry before the first section")
            continue
        key, value = match.group(1), match.group(2).strip()
        if key in sections[current]:
            issues.add(ParseError, lineno, key, "duplicate key")
            continue
        sections[current][key] = _Entry(lineno, value)
    return sections


def parse_config(text: str, registry: Registry | None = None) -> CaseConfig:
    """
    Parses a case file. Every problem in the input is collected; the error
    raised is the class of the first problem and lists all of them.
    """
    registry = registry or Registry.builtin()
    issues = _Issues()
    sections = _read_sections(text, issues)
    values: dict[str, dict[str, Any]] = {}
    lines: dict[str, int] = {}

    for section, keys in SCHEMA.items():
        entries = sections.get(section, {})
        values[section] = {}
        for key, convert in keys:
            if key not in entries:
                continue
            entry = entries.pop(key)
            lines[key] = entry.line
            try:
                values[section][key] = convert(entry.value)
            except ValueError as e:
                issues.add(RangeError, entry.line, key, str(e))

    params: dict[str, dict[str, tuple[float, ...]]] = {"field": {}, "shape": {}}
    domain = sections.get("domain", {})
    field_cls = shape_cls = None
    try:
        field_cls = registry.fields[values["domain"].get("field", "rest")]
    except FatalError as e:
        issues.add(RangeError, lines.get("field", 0), "field", str(e))
    try:
        shape_cls = registry.shapes[values["domain"].get("shape", "disk")]
    except FatalError as e:
        issues.add(RangeError, lines.get("shape", 0), "shape", str(e))
    for key in list(domain):
        entry = domain.pop(key)
        owner = None
        if field_cls is not None and key in field_cls.parameters():
            owner = "field"
        elif shape_cls is not None and key in shape_cls.parameters():
            owner = "shape"
        if owner is None:
            issues.add(UnknownKey, entry.line, key, "unknown key in [domain]")
            continue
        try:
            params[owner][key] = parse_float_list(entry.value)
        except ValueError as e:
            issues.add(RangeError, entry.line, key, str(e))

    for section, entries in sections.items():
        for key, entry in entries.items():
            if section in SCHEMA:
                issues.add(UnknownKey, entry.line, key, f"unknown key in [{section}]")

    for key in _LAWS:
        if key in values["constitutive"]:
            try:
                values["constitutive"][key] = registry.law(values["constitutive"][key])
            except (ValueError, FatalError) as e:
                issues.add(RangeError, lines[key], key, str(e))
                del values["constitutive"][key]

    def line(key: str) -> int:
        return lines.get(key, 0)

    constitutive = ConstitutiveSet(**values["constitutive"])
    for key in ("mu", "rho_vacuum", "a1", "a2", "k1", "k2", "c_lower", "c_upper", "c_theta"):
        if not getattr(constitutive, key) > 0:
            issues.add(RangeError, line(key), key, "must be strictly positive")
    for key in ("gamma", "alpha"):
        if not getattr(constitutive, key) > 0:
            issues.add(RangeError, line(key), key, "must be strictly positive")
    for key in ("eta", "zeta", "b"):
        if not getattr(constitutive, key) >= 0:
            issues.add(RangeError, line(key), key, "must be nonnegative")

    penalty = PenaltyParams(**values["penalty"])
    solver = SolverConfig(**values["solver"])
    initial = InitialData(**values["initial"])
    for key, reason in penalty.problems(constitutive.gamma) + solver.problems() + initial.problems():
        issues.add(RangeError, line(key), key, reason)

    sweep = None
    if "sweep" in sections:
        sweep = SweepSpec(**values["sweep"])
        if sweep.param not in SWEEP_PARAMS:
            issues.add(RangeError, line("param"), "param", f"must be one of {', '.join(SWEEP_PARAMS)}")

    cfg = CaseConfig(
        **values["case"],
        **values["grid"],
        **values["domain"],
        field_params=tuple(sorted(params["field"].items())),
        shape_params=tuple(sorted(params["shape"].items())),
        constitutive=constitutive,
        penalty=penalty,
        solver=solver,
        initial=initial,
        sweep=sweep,
    )
    if cfg.dim not in (2, 3):
        issues.add(RangeError, line("dim"), "dim", "must be 2 or 3")
    if cfg.cells < MIN_CELLS:
        issues.add(RangeError, line("cells"), "cells", f"must be at least {MIN_CELLS}")
    if not cfg.support_radius > 0:
        issues.add(RangeError, line("support_radius"), "support_radius", "must be positive")
    if not cfg.flow_step > 0:
        issues.add(RangeError, line("flow_step"), "flow_step", "must be positive")

    if not issues and field_cls is not None and shape_cls is not None:
        try:
            cfg.build_domain(registry)
        except (BadConfig, ValueError, TypeError) as e:
            issues.add(RangeError, line("field"), "domain", str(e))

    if issues:
        issues.raise_first()
    return cfg


def _section_values(cfg: CaseConfig, section: str) -> Iterator[tuple[str, Any]]:
    holder: Any = {
        "case": cfg,
        "grid": cfg,
        "domain": cfg,
        "constitutive": cfg.constitutive,
        "penalty": cfg.penalty,
        "solver": cfg.solver,
        "initial": cfg.initial,
        "sweep": cfg.sweep,
    }[section]
    for key, _ in SCHEMA[section]:
        yield key, getattr(holder, key)
    if section == "domain":
        yield from cfg.field_params
        yield from cfg.shape_params


def emit_config(cfg: CaseConfig) -> str:
    """
    Normalised text of ``cfg``: fixed section and key order, every key
    written, floats in round-trip notation.
    """
    out = []
    for section in SCHEMA:
        if section == "sweep" and cfg.sweep is None:
            continue
        if out:
            out.append("")
        out.append(f"[{section}]")
        for key, value in _section_values(cfg, section):
            out.append(f"{key} = {_box(value)}".rstrip())
    return "\n".join(out) + "\n"


def load_config(path: str, registry: Registry | None = None) -> CaseConfig:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError([ConfigIssue(0, path, e.strerror or str(e))])
    return parse_config(text, registry)

