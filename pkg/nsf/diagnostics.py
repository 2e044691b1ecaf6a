import math
import logging

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .geometry import DELTA_HALF_WIDTH, GeometrySnapshot, mask_chi_nu
from .grid import Grid
from .util import DegenerateSamples, InadmissibleTestFunction, fsum, smootherstep

if TYPE_CHECKING:
    from .solver import FieldState, Primitives, Solver, StepRecord, ViscousStep

log = logging.getLogger("nsf.diagnostics")

#: Version tag written in the first row of every diagnostics file.
SCHEMA = "nsf-diagnostics v1"

#: Columns of a diagnostics row, in output order.
COLUMNS = (
    "t",
    "total_mass",
    "kinetic_energy",
    "elastic_energy",
    "artificial_energy",
    "thermal_energy",
    "penalty_integral",
    "solid_mass",
    "energy_residual",
    "thermal_residual",
    "renorm_residual",
    "min_theta",
    "repair_mass",
    "repair_thermal",
    "repair_momentum",
    "repair_cells",
    "velocity_l2",
    "density_l_gamma",
    "artificial_bound",
    "viscous_integral",
    "theta_integral",
    "solid_viscous_integral",
    "solid_conduction_integral",
    "mask_defect",
)

#: Largest admissible normal derivative of a test function on the interface band.
ADMISSIBLE_TOL = 1e-10

WeightFn = Callable[[GeometrySnapshot], np.ndarray]


def total_mass(state: "FieldState", grid: Grid) -> float:
    return fsum(state.rho) * grid.cell_volume


def penalty_increment(prim: "Primitives", dt: float) -> float:
    """``dt * int_Gamma |(u - V) . n|^2 dS``, with the regularised surface delta."""
    geo = prim.geometry
    mismatch = np.sum((prim.u - geo.V) * geo.normal, axis=0)
    return dt * fsum(geo.delta * mismatch * mismatch) * geo.grid.cell_volume


def penalty_integral(
    solver: "Solver", state: "FieldState", t: float, dt: float, accumulator: float
) -> float:
    return accumulator + penalty_increment(solver.primitives(state, t), dt)


def solid_mass(state: "FieldState", geo: GeometrySnapshot) -> float:
    """Mass in cells more than one and a half cells outside ``Omega_t``."""
    grid = geo.grid
    return fsum(np.where(geo.phi > DELTA_HALF_WIDTH * grid.h, state.rho, 0.0)) * grid.cell_volume


def energy_components(solver: "Solver", state: "FieldState", prim: "Primitives") -> dict[str, float]:
    cs, pen, vol = solver.constitutive, solver.penalty, solver.grid.cell_volume
    rho = prim.rho
    return {
        "kinetic_energy": 0.5 * fsum(rho * np.sum(prim.u * prim.u, axis=0)) * vol,
        "elastic_energy": fsum(cs.elastic_density(rho)) * vol,
        "artificial_energy": pen.delta / (pen.beta - 1) * fsum(rho**pen.beta) * vol,
        "thermal_energy": fsum(state.w) * vol,
    }


def total_energy(components: dict[str, float]) -> float:
    return math.fsum(components.values())


def transfer(prim: "Primitives") -> float:
    """``int m . V``, the momentum carried along by the domain motion."""
    geo = prim.geometry
    return fsum(prim.rho * np.sum(prim.u * geo.V, axis=0)) * geo.grid.cell_volume


def work_rate(solver: "Solver", prim: "Primitives") -> float:
    """
    Rate of work done by the prescribed motion through the explicit forces of
    a stage, in the discrete form the momentum update uses: the convective
    face fluxes against the face differences of ``V``, the enthalpy ``g``
    and thermal pressure ``theta p_theta`` against ``div (rho V)`` and
    ``div (s V)``, and ``-m . dV/dt``.
    """
    geo = prim.geometry
    if solver.domain.field.is_rest:
        return 0.0
    cs, pen, h, dim = solver.constitutive, solver.penalty, solver.grid.h, solver.grid.dim
    m = prim.rho * prim.u
    convective = 0.0
    for a in range(dim):
        for b in range(dim):
            flux = solver.rusanov_flux(m[b], prim, a)
            convective -= fsum(flux * np.diff(geo.V[b], axis=a)) / h
    enthalpy = cs.enthalpy(prim.rho, pen.delta, pen.beta)
    thermal = prim.theta * cs.p_theta(prim.rho)
    div_rho_V = np.trace(solver.cell_gradient(prim.rho * geo.V), axis1=0, axis2=1)
    div_s_V = np.trace(solver.cell_gradient(prim.presence * geo.V), axis1=0, axis2=1)
    density = -enthalpy * div_rho_V - thermal * div_s_V - np.sum(m * geo.dVdt, axis=0)
    return (convective + fsum(density)) * solver.grid.cell_volume


def viscous_work(solver: "Solver", step: "ViscousStep") -> float:
    """``int S_omega(grad (s u_mean)) : grad (s V)``, the work rate of the viscous substep."""
    prim = step.prim
    if solver.domain.field.is_rest:
        return 0.0
    S, _ = solver.viscous_terms(prim, step.velocity)
    grad_V = solver.cell_gradient(prim.presence * prim.geometry.V)
    return fsum(S * grad_V) * solver.grid.cell_volume


def work_terms(solver: "Solver", record: "StepRecord", centering: str = "midpoint") -> float:
    """
    Work of the prescribed motion over one step. ``midpoint`` centres the
    explicit rate on the step midpoint by averaging both Runge-Kutta stages;
    ``left`` uses the rate at the start of the step. The viscous substep
    adds its own work.
    """
    first, second = record.stages
    if centering == "left":
        explicit = work_rate(solver, first.prim)
    else:
        explicit = 0.5 * (work_rate(solver, first.prim) + work_rate(solver, second.prim))
    return record.dt * (explicit + viscous_work(solver, record.viscous))


def heat_sink(solver: "Solver", prim: "Primitives") -> float:
    """``delta int theta^(alpha + 1)``."""
    cs, pen = solver.constitutive, solver.penalty
    return pen.delta * fsum(prim.theta ** (cs.alpha + 1)) * solver.grid.cell_volume


def viscous_dissipation(solver: "Solver", step: "ViscousStep") -> float:
    """``delta int S_omega : grad (s u_mean)`` of the viscous substep."""
    density = solver.dissipation_density(step.prim, step.velocity)
    return solver.penalty.delta * fsum(density) * solver.grid.cell_volume


def delta_dissipation(solver: "Solver", record: "StepRecord") -> float:
    """
    Rate of the ``delta`` regularisation sinks over one step: the heat sink
    averaged over both stages plus the share of the viscous heating that
    leaves the thermal energy.
    """
    sink = 0.5 * sum(heat_sink(solver, stage.prim) for stage in record.stages)
    return sink + viscous_dissipation(solver, record.viscous)


def friction_dissipation(solver: "Solver", prim: "Primitives") -> float:
    zeta = solver.constitutive.zeta
    if zeta == 0:
        return 0.0
    geo = prim.geometry
    slip = prim.u - geo.V
    tangential = slip - np.sum(slip * geo.normal, axis=0) * geo.normal
    return zeta * fsum(geo.delta * np.sum(tangential**2, axis=0)) * solver.grid.cell_volume


def energy_residual(
    energy_before: float,
    energy_after: float,
    transfer_before: float,
    transfer_after: float,
    dt: float,
    dissipation: float,
    penalty: float,
    work: float,
) -> float:
    """
    Discrete total energy balance of one step on the moving domain:
    ``dE - d int m.V + dt D + P - W``, with ``D`` the rate of regularisation
    and friction dissipation, ``P`` the energy released by the boundary
    penalty and ``W`` the work of the prescribed motion. A scheme consistent
    with the energy inequality keeps this below a small tolerance.
    """
    return (
        (energy_after - energy_before)
        - (transfer_after - transfer_before)
        + dt * dissipation
        + penalty
        - work
    )


def fluid_core(geo: GeometrySnapshot) -> np.ndarray:
    h = geo.grid.h
    return 1.0 - smootherstep((geo.phi + 6 * h) / (3 * h))


def collar(geo: GeometrySnapshot) -> np.ndarray:
    h = geo.grid.h
    return 1.0 - smootherstep((np.abs(geo.phi) - 3 * h) / (3 * h))


def solid_shell(geo: GeometrySnapshot) -> np.ndarray:
    h = geo.grid.h
    return smootherstep((geo.phi - 3 * h) / (3 * h))


def constant(geo: GeometrySnapshot) -> np.ndarray:
    return np.ones(geo.grid.shape)


#: Built-in test functions: nonnegative and flat across the interface band.
TEST_FUNCTIONS: dict[str, WeightFn] = {
    "constant": constant,
    "fluid-core": fluid_core,
    "collar": collar,
    "solid-shell": solid_shell,
}


def check_admissible(psi: np.ndarray, geo: GeometrySnapshot, name: str = "test function") -> None:
    """
    Raises :class:`InadmissibleTestFunction` when ``psi`` is negative or its
    normal derivative does not vanish where the surface delta is supported.
    """
    if np.any(psi < 0):
        raise InadmissibleTestFunction(f"{name} takes negative values")
    grad = np.stack(np.gradient(psi, geo.grid.h))
    normal = np.abs(np.sum(grad * geo.normal, axis=0))
    band = geo.delta > 0
    if np.any(band) and float(np.max(normal[band])) > ADMISSIBLE_TOL:
        raise InadmissibleTestFunction(
            f"{name} has normal derivative {float(np.max(normal[band])):.3e} on the interface"
        )


def thermal_residual(solver: "Solver", record: "StepRecord", psi: np.ndarray) -> float:
    """
    Left minus right side of the thermal energy inequality over one step,
    tested against ``psi``. The right side is recomputed from the stage
    primitives and the viscous substep, with the full viscous heating and
    without the ``delta`` heat sink. What is left is minus the ``delta``
    sinks plus the positivity repairs.
    """
    cs, h, vol = solver.constitutive, solver.grid.h, solver.grid.cell_volume
    rate = 0.0
    for stage in record.stages:
        prim = stage.prim
        for a, (advective, conductive) in enumerate(solver.thermal_fluxes(prim)):
            rate += 0.5 * fsum((advective - conductive) * np.diff(psi, axis=a)) / h
        div_su = np.trace(prim.grad_su, axis1=0, axis2=1)
        rate -= 0.5 * fsum(psi * prim.theta * cs.p_theta(prim.rho) * div_su)
    step = record.viscous
    heating = fsum(psi * solver.dissipation_density(step.prim, step.velocity))
    change = fsum(psi * (record.state.w - record.before.w))
    return (change - record.dt * (rate + heating)) * vol


def truncation(rho: np.ndarray, k: float) -> np.ndarray:
    return np.minimum(rho, k)


def renorm_residual(
    rho_before: np.ndarray,
    rho_after: np.ndarray,
    stages: Sequence[tuple[np.ndarray, np.ndarray]],
    k: float,
    dt: float,
    cell_volume: float,
) -> float:
    """
    Residual of the renormalised continuity equation with ``b = T_k``,
    tested against 1, over one step. ``stages`` holds ``(rho, div u)`` of each
    Runge-Kutta stage; the source ``(T_k'(rho) rho - T_k(rho)) div u`` is
    averaged over them.
    """
    change = fsum(truncation(rho_after, k) - truncation(rho_before, k))
    source = 0.0
    for rho, div_u in stages:
        source += fsum(np.where(rho > k, -k * div_u, 0.0)) / len(stages)
    return (change + dt * source) * cell_volume


def uniform_bounds(solver: "Solver", state: "FieldState", prim: "Primitives") -> dict[str, float]:
    """Norms that stay bounded independently of the penalisation parameters."""
    cs, pen, vol = solver.constitutive, solver.penalty, solver.grid.cell_volume
    rho = prim.rho
    return {
        "velocity_l2": math.sqrt(fsum(rho * np.sum(prim.u**2, axis=0)) * vol),
        "elastic_energy": fsum(cs.elastic_density(rho)) * vol,
        "density_l_gamma": (fsum(rho**cs.gamma) * vol) ** (1 / cs.gamma),
        "artificial_bound": pen.delta * fsum(rho**pen.beta) * vol,
        "thermal_l1": fsum(np.abs(state.w)) * vol,
    }


def convergence_rate(samples: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log(value)`` against ``log(parameter)``."""
    if len(samples) < 3:
        raise DegenerateSamples(f"need at least 3 samples, got {len(samples)}")
    params = np.array([p for p, _ in samples], dtype=float)
    values = np.array([v for _, v in samples], dtype=float)
    if np.any(params <= 0) or np.any(values <= 0):
        raise DegenerateSamples("parameters and values must be positive")
    if len(np.unique(params)) != len(params):
        raise DegenerateSamples("parameters must be distinct")
    slope, _ = np.polyfit(np.log(params), np.log(values), 1)
    return float(slope)


@dataclass(frozen=True)
class Gate:
    name: str
    value: float
    limit: float

    @property
    def passed(self) -> bool:
        return self.value <= self.limit


class Monitor:
    """
    Accumulates the time-integrated diagnostics of a run, step by step, and
    produces the rows of a :data:`COLUMNS` series.

    :param solver: the solver producing the steps
    :param initial: the initial state, which fixes the gate scales
    """

    def __init__(self, solver: "Solver", initial: "FieldState"):
        self.solver = solver
        self.cumulative = dict.fromkeys(
            (
                "penalty_integral",
                "thermal_residual",
                "renorm_residual",
                "viscous_integral",
                "theta_integral",
                "solid_viscous_integral",
                "solid_conduction_integral",
                "mask_defect",
                "repair_mass",
                "repair_thermal",
                "repair_momentum",
                "repair_cells",
            ),
            0.0,
        )
        self.worst_energy = -math.inf
        self.worst_thermal = -math.inf
        self.row_energy = -math.inf

        prim = solver.primitives(initial, 0.0)
        components = energy_components(solver, initial, prim)
        self.energy_scale = math.fsum(abs(v) for v in components.values())
        self.thermal_scale = abs(components["thermal_energy"])
        self._last = (0.0, total_energy(components), transfer(prim))
        for name, fn in TEST_FUNCTIONS.items():
            check_admissible(fn(prim.geometry), prim.geometry, name)

    def _balance(self, state: "FieldState", t: float) -> tuple[float, float]:
        t0, energy, carried = self._last
        if t0 == t:
            return energy, carried
        prim = self.solver.primitives(state, t)
        return total_energy(energy_components(self.solver, state, prim)), transfer(prim)

    def record(self, record: "StepRecord") -> None:
        solver, acc = self.solver, self.cumulative
        grid, dt, vol = solver.grid, record.dt, solver.grid.cell_volume
        t1 = record.t + dt

        energy0, carried0 = self._balance(record.before, record.t)
        after = solver.primitives(record.state, t1)
        energy1 = total_energy(energy_components(solver, record.state, after))
        carried1 = transfer(after)
        self._last = (t1, energy1, carried1)

        prims = [stage.prim for stage in record.stages]
        friction = 0.5 * sum(friction_dissipation(solver, p) for p in prims)
        dissipation = delta_dissipation(solver, record) + friction
        work = work_terms(solver, record, solver.config.time_centering)
        residual = energy_residual(
            energy0, energy1, carried0, carried1, dt, dissipation, record.penalty_dissipation, work
        )
        self.worst_energy = max(self.worst_energy, residual)
        self.row_energy = max(self.row_energy, residual)

        geo = after.geometry
        for name, fn in TEST_FUNCTIONS.items():
            value = thermal_residual(solver, record, fn(geo))
            if name == "constant":
                acc["thermal_residual"] += value
            self.worst_thermal = max(self.worst_thermal, value)

        acc["renorm_residual"] += renorm_residual(
            record.before.rho,
            record.state.rho,
            [(p.rho, np.trace(p.grad_u, axis1=0, axis2=1)) for p in prims],
            solver.config.renorm_cutoff,
            dt,
            vol,
        )
        acc["penalty_integral"] += penalty_increment(after, dt)

        cs, pen = solver.constitutive, solver.penalty
        solid = geo.phi > 0
        viscous = solver.dissipation_density(after)
        acc["viscous_integral"] += dt * fsum(viscous) * vol
        acc["theta_integral"] += dt * fsum(after.theta ** (cs.alpha + 1)) * vol
        acc["solid_viscous_integral"] += dt * fsum(np.where(solid, viscous, 0.0)) * vol
        grad_theta = np.stack(np.gradient(after.theta, grid.h))
        conduction = after.chi * cs.kappa(after.theta) * np.sum(grad_theta**2, axis=0)
        acc["solid_conduction_integral"] += dt * fsum(np.where(solid, conduction, 0.0)) * vol
        acc["mask_defect"] += dt * fsum(np.abs(after.chi - mask_chi_nu(geo.phi, pen.nu))) * vol

        acc["repair_mass"] += record.repair.mass
        acc["repair_thermal"] += record.repair.thermal
        acc["repair_momentum"] += record.repair.momentum
        acc["repair_cells"] += record.repair.cells

    def row(self, state: "FieldState", t: float) -> dict[str, float]:
        solver = self.solver
        prim = solver.primitives(state, t)
        row = {"t": t, "total_mass": total_mass(state, solver.grid)}
        row.update(energy_components(solver, state, prim))
        bounds = uniform_bounds(solver, state, prim)
        row.update(self.cumulative)
        row["solid_mass"] = solid_mass(state, prim.geometry)
        # rows without a step since the last one have nothing to report
        row["energy_residual"] = self.row_energy if self.row_energy > -math.inf else 0.0
        row["min_theta"] = float(np.min(prim.theta))
        for key in ("velocity_l2", "density_l_gamma", "artificial_bound"):
            row[key] = bounds[key]
        self.row_energy = -math.inf
        return {key: float(row[key]) for key in COLUMNS}

    def gates(self) -> list[Gate]:
        cfg = self.solver.config
        gates = []
        if self.worst_energy > -math.inf:
            gates.append(
                Gate("energy", self.worst_energy, cfg.energy_tolerance * self.energy_scale)
            )
        if self.worst_thermal > -math.inf:
            gates.append(
                Gate("thermal", self.worst_thermal, cfg.thermal_tolerance * self.thermal_scale)
            )
        return gates
