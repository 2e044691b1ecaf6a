import math
import logging

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .constitutive import ConstitutiveSet, stress, validate_hypotheses
from .geometry import GeometrySnapshot, MovingDomain, PenaltyParams, mask_chi_nu_xi
from .grid import Grid
from .util import (
    BadConfig,
    BlowUp,
    EmptyState,
    HypothesisViolation,
    RepairTotals,
    fsum,
    smootherstep,
)

if TYPE_CHECKING:
    from .diagnostics import Gate

log = logging.getLogger("nsf.solver")

#: Default density floor of the velocity reconstruction in :func:`relax_normal`.
RHO_FLOOR = 1e-10

#: Lowest admissible temperature after a step.
THETA_FLOOR = 1e-8

#: Any field magnitude above this value is a blow-up.
BLOWUP_LIMIT = 1e12

#: Relative convergence tolerance and iteration cap of the viscous step.
VISCOUS_TOL = 1e-13
VISCOUS_ITERATIONS = 200

#: Flux schemes understood by the solver.
FLUXES = ("rusanov",)

#: Time-centring modes of the transfer terms, see :mod:`nsf.diagnostics`.
CENTERINGS = ("midpoint", "left")


@dataclass(frozen=True)
class SolverConfig:
    end_time: float = 0.5
    cadence: float = 0.05
    cfl: float = 0.4
    flux: str = "rusanov"
    density_weighted: bool = True
    energy_tolerance: float = 1e-8
    thermal_tolerance: float = 1e-8
    override_hypotheses: bool = False
    time_centering: str = "midpoint"
    renorm_cutoff: float = 1.0
    dilute_density: float = 0.5

    def problems(self) -> list[tuple[str, str]]:
        found = []
        if not (math.isfinite(self.end_time) and self.end_time >= 0):
            found.append(("end_time", f"must be nonnegative, got {self.end_time!r}"))
        if not self.cadence > 0:
            found.append(("cadence", f"must be positive, got {self.cadence!r}"))
        if not 0 < self.cfl < 1:
            found.append(("cfl", f"must lie in (0, 1), got {self.cfl!r}"))
        if self.flux not in FLUXES:
            found.append(("flux", f"unknown flux scheme '{self.flux}'"))
        if self.time_centering not in CENTERINGS:
            found.append(("time_centering", f"must be one of {', '.join(CENTERINGS)}"))
        if not self.renorm_cutoff > 0:
            found.append(("renorm_cutoff", f"must be positive, got {self.renorm_cutoff!r}"))
        if not self.dilute_density > 0:
            found.append(("dilute_density", f"must be positive, got {self.dilute_density!r}"))
        for key in ("energy_tolerance", "thermal_tolerance"):
            if not getattr(self, key) >= 0:
                found.append((key, "must be nonnegative"))
        return found


@dataclass(frozen=True)
class InitialData:
    """
    Initial density ``density`` inside ``Omega_0``, momentum ``"carried"``
    (``rho V(0)``) or ``"zero"``, and a temperature made of a constant
    background plus an optional Gaussian bump, clipped to
    ``[theta_lower, theta_upper]``.
    """

    density: float = 1.0
    momentum: str = "carried"
    temperature: float = 0.5
    theta_lower: float = 1e-3
    theta_upper: float = 10.0
    bump_amplitude: float = 0.0
    bump_width: float = 0.1
    bump_center: tuple[float, ...] = ()

    def problems(self) -> list[tuple[str, str]]:
        found = []
        if not self.density >= 0:
            found.append(("density", f"must be nonnegative, got {self.density!r}"))
        if self.momentum not in ("carried", "zero"):
            found.append(("momentum", "must be 'carried' or 'zero'"))
        if not 0 < self.theta_lower <= self.theta_upper:
            found.append(("theta_lower", "needs 0 < theta_lower <= theta_upper"))
        if not self.temperature >= 0:
            found.append(("temperature", f"must be nonnegative, got {self.temperature!r}"))
        if not self.bump_width > 0:
            found.append(("bump_width", f"must be positive, got {self.bump_width!r}"))
        return found


@dataclass(frozen=True, eq=False)
class FieldState:
    """
    Cell averages of the conserved fields: density ``rho``, momentum ``m``
    (component axis first) and thermal variable ``w = (rho + delta) Q(theta)``.
    """

    rho: np.ndarray
    m: np.ndarray
    w: np.ndarray

    def combine(self, other: "FieldState", a: float, b: float) -> "FieldState":
        """``a * self + b * other``, fieldwise."""
        return FieldState(
            a * self.rho + b * other.rho, a * self.m + b * other.m, a * self.w + b * other.w
        )

    def advanced(self, tendency: "FieldState", dt: float) -> "FieldState":
        return FieldState(
            self.rho + dt * tendency.rho, self.m + dt * tendency.m, self.w + dt * tendency.w
        )


@dataclass(frozen=True, eq=False)
class Primitives:
    """
    Reconstructed quantities of one Runge-Kutta stage. ``presence`` is the
    weight ``min(1, rho / dilute_density)`` of the thermal pressure and
    viscous forces, and ``grad_su`` the gradient of ``presence * u``.
    """

    t: float
    geometry: GeometrySnapshot
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    blend: np.ndarray
    pressure: np.ndarray
    sound: np.ndarray
    mu: np.ndarray
    chi: np.ndarray
    presence: np.ndarray
    grad_u: np.ndarray
    grad_su: np.ndarray


@dataclass(frozen=True, eq=False)
class Stage:
    state: FieldState
    prim: Primitives
    tendency: FieldState


@dataclass(frozen=True, eq=False)
class ViscousStep:
    """The viscous substep of a step: its start state and the mean velocity it converged to."""

    prim: Primitives
    velocity: np.ndarray
    iterations: int


@dataclass(eq=False)
class StepRecord:
    """
    Everything the diagnostics need to know about one step: the states before
    and after, both Runge-Kutta stages, the viscous substep, the dissipation
    released by the implicit penalty and the positivity repairs.
    """

    t: float
    dt: float
    before: FieldState
    state: FieldState
    stages: tuple[Stage, Stage]
    viscous: ViscousStep
    penalty_dissipation: float
    repair: RepairTotals


def _sl(ndim: int, axis: int, s: slice) -> tuple[slice, ...]:
    index = [slice(None)] * ndim
    index[axis] = s
    return tuple(index)


def _ghost(q: np.ndarray, axis: int, sign: float) -> np.ndarray:
    """Pads one ghost cell on both ends along ``axis`` holding ``sign * edge``."""
    first = sign * q[_sl(q.ndim, axis, slice(0, 1))]
    last = sign * q[_sl(q.ndim, axis, slice(-1, None))]
    return np.concatenate([first, q, last], axis=axis)


def _centered(q: np.ndarray, axis: int, h: float, sign: float) -> np.ndarray:
    p = _ghost(q, axis, sign)
    n = p.ndim
    return (p[_sl(n, axis, slice(2, None))] - p[_sl(n, axis, slice(None, -2))]) / (2 * h)


def _pairs(q: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Left and right cell values of all interior faces along ``axis``."""
    return q[_sl(q.ndim, axis, slice(None, -1))], q[_sl(q.ndim, axis, slice(1, None))]


def _wall_divergence(flux: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Difference quotient of interior face fluxes, with zero flux through the walls."""
    pad = [(0, 0)] * flux.ndim
    pad[axis] = (1, 1)
    return np.diff(np.pad(flux, pad), axis=axis) / h


def reconstruct_velocity(m: np.ndarray, rho: np.ndarray, floor: float) -> np.ndarray:
    """
    ``m / rho`` where ``rho >= floor`` and ``2 rho m / (rho^2 + floor^2)``
    below, which is bounded by ``|m| / floor`` and vanishes with ``rho``.
    """
    dense = rho >= floor
    scale = np.where(dense, 1.0 / np.where(dense, rho, 1.0), 2.0 * rho / (rho * rho + floor * floor))
    return m * scale


def relax_normal(
    m: np.ndarray,
    rho: np.ndarray,
    V: np.ndarray,
    normal: np.ndarray,
    sigma: np.ndarray,
    dt: float,
    eps: float,
    weighted: bool = True,
    floor: float = RHO_FLOOR,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Pointwise implicit Stokes-Carey penalty: the normal mismatch
    ``(u - V) . n`` is multiplied by ``1 / (1 + dt sigma / eps)`` (density
    weighted) or ``1 / (1 + dt sigma / (eps rho))`` (unweighted); tangential
    momentum is unchanged. Velocities are reconstructed with
    :func:`reconstruct_velocity` below ``floor``.

    Returns the new momentum and the per-cell energy released,
    ``rho (1 - f^2) / 2 ((u - V) . n)^2 >= 0``.
    """
    u = reconstruct_velocity(m, rho, floor)
    mismatch = np.sum((u - V) * normal, axis=0)
    stiffness = dt * sigma / eps
    if not weighted:
        stiffness = stiffness / np.maximum(rho, floor)
    relaxed = mismatch / (1.0 + stiffness)
    m_new = m + rho * (relaxed - mismatch) * normal
    released = -rho * (relaxed - mismatch) * (mismatch + relaxed) / 2
    return m_new, released


class Solver:
    """
    Finite-volume discretisation of the penalised Navier-Stokes-Fourier
    system on the box of a :class:`MovingDomain`. Explicit tendencies are
    integrated with the two-stage SSP Runge-Kutta method. The viscous stress
    follows as a Crank-Nicolson substep, and the stiff normal boundary
    penalty is applied pointwise-implicitly last, so the step size does not
    depend on ``eps``.

    :param grid: discretisation of the box
    :param domain: the moving fluid domain
    :param constitutive: material laws
    :param penalty: penalisation parameters
    :param config: time-stepping and gate settings
    """

    def __init__(
        self,
        grid: Grid,
        domain: MovingDomain,
        constitutive: ConstitutiveSet,
        penalty: PenaltyParams,
        config: SolverConfig = SolverConfig(),
    ):
        if grid.dim != domain.dim:
            raise BadConfig(f"grid is {grid.dim}-D but domain is {domain.dim}-D")
        self.grid = grid
        self.domain = domain
        self.constitutive = constitutive
        self.penalty = penalty
        self.config = config

    def __repr__(self) -> str:
        return f"<solver {self.grid.dim}-D {self.grid.cells} cells, {self.domain!r}>"

    # reconstruction

    def primitives(self, state: FieldState, t: float) -> Primitives:
        """
        Velocity, temperature, pressure and masks of ``state`` at time ``t``.
        Velocities are blended toward ``V`` in the deep solid and at vacuum.
        """
        cs, pen, h = self.constitutive, self.penalty, self.grid.h
        geo = self.domain.snapshot(t, self.grid)
        rho = np.maximum(state.rho, 0.0)
        raw = reconstruct_velocity(state.m, rho, cs.rho_vacuum)
        blend = np.maximum(
            smootherstep((geo.phi - 3 * h) / (3 * h)),
            1.0 - smootherstep(rho / cs.rho_vacuum),
        )
        u = (1.0 - blend) * raw + blend * geo.V
        presence = np.minimum(1.0, rho / self.config.dilute_density)
        theta = cs.invert_Q(np.maximum(state.w / (rho + pen.delta), 0.0))
        return Primitives(
            t=t,
            geometry=geo,
            rho=rho,
            u=u,
            theta=theta,
            blend=blend,
            pressure=cs.artificial_pressure(rho, theta, pen.delta, pen.beta),
            sound=cs.sound_speed(rho, theta, pen.delta, pen.beta),
            mu=geo.viscosity(pen.omega, cs.mu),
            chi=mask_chi_nu_xi(geo.phi, pen.nu, pen.xi),
            presence=presence,
            grad_u=self.cell_gradient(u),
            grad_su=self.cell_gradient(presence * u),
        )

    def cell_gradient(self, u: np.ndarray) -> np.ndarray:
        """``G[c, e] = d u_c / d x_e`` by centred differences, no-slip ghosts."""
        dim, h = self.grid.dim, self.grid.h
        return np.stack(
            [np.stack([_centered(u[c], e, h, -1.0) for e in range(dim)]) for c in range(dim)]
        )

    def centered_gradient(self, q: np.ndarray) -> np.ndarray:
        """Centred gradient of a scalar with mirrored ghosts."""
        h = self.grid.h
        return np.stack([_centered(q, a, h, 1.0) for a in range(self.grid.dim)])

    def viscous_terms(self, prim: Primitives, u: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """
        Cell stress ``S_omega(grad (s u))`` and the gradient ``grad (s u)`` it is
        built from, for the velocity of ``prim`` unless ``u`` is given.
        """
        G = prim.grad_su if u is None else self.cell_gradient(prim.presence * u)
        return stress(G, prim.mu, self.constitutive.eta, self.grid.dim), G

    def dissipation_density(self, prim: Primitives, u: np.ndarray | None = None) -> np.ndarray:
        """Cellwise ``S_omega : grad (s u)``, nonnegative."""
        S, G = self.viscous_terms(prim, u)
        return np.sum(S * G, axis=(0, 1))

    def rusanov_flux(self, q: np.ndarray, prim: Primitives, axis: int) -> np.ndarray:
        """Local Lax-Friedrichs flux of ``q u_axis`` through the interior faces."""
        ua = prim.u[axis]
        qL, qR = _pairs(q, axis)
        uL, uR = _pairs(ua, axis)
        cL, cR = _pairs(np.abs(ua) + prim.sound, axis)
        return 0.5 * (qL * uL + qR * uR) - 0.5 * np.maximum(cL, cR) * (qR - qL)

    def _rusanov(self, q: np.ndarray, prim: Primitives, axis: int) -> np.ndarray:
        return _wall_divergence(self.rusanov_flux(q, prim, axis), axis, self.grid.h)

    # tendencies

    def continuity_rhs(
        self, state: FieldState, t: float, prim: Primitives | None = None
    ) -> np.ndarray:
        prim = prim or self.primitives(state, t)
        out = self.grid.zeros()
        for a in range(self.grid.dim):
            out -= self._rusanov(prim.rho, prim, a)
        return out

    def pressure_force(self, prim: Primitives) -> np.ndarray:
        """
        ``-rho grad g - s grad (theta p_theta)``, with ``g`` the enthalpy of
        the elastic and artificial pressures. The first term pairs exactly
        with the central part of the mass flux, the second with the
        compression work of :meth:`thermal_rhs`.
        """
        cs, pen = self.constitutive, self.penalty
        g = cs.enthalpy(prim.rho, pen.delta, pen.beta)
        thermal = prim.theta * cs.p_theta(prim.rho)
        return -(prim.rho * self.centered_gradient(g) + prim.presence * self.centered_gradient(thermal))

    def viscous_force(self, prim: Primitives, u: np.ndarray | None = None) -> np.ndarray:
        """
        ``s div S_omega(grad (s u))`` on the centred stencil; its work on
        ``u`` is minus :meth:`dissipation_density`, summed over the box.
        """
        dim, h = self.grid.dim, self.grid.h
        S, _ = self.viscous_terms(prim, u)
        out = self.grid.vector_zeros()
        for b in range(dim):
            for a in range(dim):
                out[b] += _centered(S[b, a], a, h, 1.0)
        return prim.presence * out

    def friction_force(self, prim: Primitives) -> np.ndarray:
        """Tangential wall friction ``-zeta delta_Gamma (u - V)_tau``."""
        zeta = self.constitutive.zeta
        if zeta == 0:
            return self.grid.vector_zeros()
        geo = prim.geometry
        slip = prim.u - geo.V
        tangential = slip - np.sum(slip * geo.normal, axis=0) * geo.normal
        return -zeta * geo.delta * tangential

    def momentum_rhs(
        self, state: FieldState, t: float, prim: Primitives | None = None, viscous: bool = True
    ) -> np.ndarray:
        """
        Momentum tendency; the normal boundary penalty is excluded, and so is
        the viscous force when ``viscous`` is false.
        """
        prim = prim or self.primitives(state, t)
        out = self.pressure_force(prim) + self.friction_force(prim)
        for a in range(self.grid.dim):
            for b in range(self.grid.dim):
                out[b] -= self._rusanov(prim.rho * prim.u[b], prim, a)
        if viscous:
            out += self.viscous_force(prim)
        return out

    def thermal_fluxes(self, prim: Primitives) -> list[tuple[np.ndarray, np.ndarray]]:
        """
        Per axis, the advective flux of ``rho Q(theta)`` (upwinded on the face
        velocity) and the conductive flux ``chi kappa d theta / dx`` (harmonic
        face conductivity) through the interior faces.
        """
        cs, h = self.constitutive, self.grid.h
        theta = prim.theta
        energy = prim.rho * cs.thermal_Q(theta)
        conductivity = prim.chi * cs.kappa(theta)
        fluxes = []
        for a in range(self.grid.dim):
            uL, uR = _pairs(prim.u[a], a)
            eL, eR = _pairs(energy, a)
            speed = 0.5 * (uL + uR)
            kL, kR = _pairs(conductivity, a)
            total = kL + kR
            harmonic = np.where(total > 0, 2 * kL * kR / np.where(total > 0, total, 1.0), 0.0)
            tL, tR = _pairs(theta, a)
            fluxes.append((speed * np.where(speed > 0, eL, eR), harmonic * (tR - tL) / h))
        return fluxes

    def thermal_rhs(
        self, state: FieldState, t: float, prim: Primitives | None = None, viscous: bool = True
    ) -> np.ndarray:
        """Tendency of ``w``; without the viscous heating when ``viscous`` is false."""
        prim = prim or self.primitives(state, t)
        cs, pen, h = self.constitutive, self.penalty, self.grid.h
        theta = prim.theta
        out = self.grid.zeros()
        for a, (advective, conductive) in enumerate(self.thermal_fluxes(prim)):
            out -= _wall_divergence(advective - conductive, a, h)

        div_su = np.trace(prim.grad_su, axis1=0, axis2=1)
        out -= theta * cs.p_theta(prim.rho) * div_su
        out -= pen.delta * theta ** (cs.alpha + 1)
        if viscous:
            out += (1.0 - pen.delta) * self.dissipation_density(prim)
        return out

    def tendencies(self, state: FieldState, prim: Primitives) -> FieldState:
        """The explicit part of a step: everything but the viscous stress and the penalty."""
        return FieldState(
            self.continuity_rhs(state, prim.t, prim),
            self.momentum_rhs(state, prim.t, prim, viscous=False),
            self.thermal_rhs(state, prim.t, prim, viscous=False),
        )

    # time stepping

    def viscous_step(self, m: np.ndarray, prim: Primitives, dt: float) -> tuple[np.ndarray, ViscousStep]:
        """
        Crank-Nicolson step of the viscous force from the velocity ``u`` of
        ``prim``: ``rho (u' - u) = dt F(u_mean)`` with ``u_mean = (u + u') / 2``,
        solved by fixed-point iteration on ``u_mean``. The kinetic energy it
        removes is ``dt int S : grad (s u_mean)``, the heat of the step.
        """
        u = prim.u
        filled = prim.rho > 0
        inverse = np.where(filled, 1.0 / np.where(filled, prim.rho, 1.0), 0.0)
        tol = VISCOUS_TOL * max(1.0, float(np.max(np.abs(u))))
        mean, iterations, change = u, 0, math.inf
        while change > tol and iterations < VISCOUS_ITERATIONS:
            update = u + 0.5 * dt * inverse * self.viscous_force(prim, mean)
            change = float(np.max(np.abs(update - mean)))
            mean = update
            iterations += 1
        if change > tol:
            log.warning(f"t={prim.t:.6g}: viscous step stopped after {iterations} iterations at {change:.3e}")
        return m + dt * self.viscous_force(prim, mean), ViscousStep(prim, mean, iterations)

    def apply_penalty_implicit(
        self, m: np.ndarray, rho: np.ndarray, t: float, dt: float
    ) -> np.ndarray:
        return self._penalize(m, rho, t, dt)[0]

    def _penalize(
        self, m: np.ndarray, rho: np.ndarray, t: float, dt: float
    ) -> tuple[np.ndarray, np.ndarray]:
        geo = self.domain.snapshot(t, self.grid)
        return relax_normal(
            m,
            np.maximum(rho, 0.0),
            geo.V,
            geo.normal,
            geo.delta,
            dt,
            self.penalty.eps,
            self.config.density_weighted,
            self.constitutive.rho_vacuum,
        )

    def cfl_dt(self, state: FieldState, t: float = 0.0, prim: Primitives | None = None) -> float:
        """
        Largest stable step, scaled by the CFL number: the acoustic limit
        ``h / (|u| + c)``, the parabolic limit ``h^2 / (2 dim D)`` of the
        thermal diffusivity ``D`` and the limit ``2 h^2 / (dim nu)`` of the
        kinematic viscosity ``nu = (2 mu + eta) s^2 / rho`` of the centred
        viscous stencil.
        """
        if state.rho.size == 0:
            raise EmptyState("cannot compute a time step for an empty state")
        if not (
            np.all(np.isfinite(state.rho))
            and np.all(np.isfinite(state.m))
            and np.all(np.isfinite(state.w))
        ):
            raise EmptyState("state holds non-finite values")
        prim = prim or self.primitives(state, t)
        cs, h, dim = self.constitutive, self.grid.h, self.grid.dim
        speed = np.sqrt(np.sum(prim.u * prim.u, axis=0)) + prim.sound
        acoustic = h / float(np.max(speed)) if np.max(speed) > 0 else math.inf
        diffusivity = prim.chi * cs.kappa(prim.theta)
        diffusivity = diffusivity / ((prim.rho + self.penalty.delta) * cs.c_v(prim.theta))
        d_max = float(np.max(diffusivity))
        parabolic = h * h / (2 * dim * d_max) if d_max > 0 else math.inf
        filled = prim.rho > 0
        mobility = np.where(filled, prim.presence**2 / np.where(filled, prim.rho, 1.0), 0.0)
        nu_max = float(np.max((2 * prim.mu + cs.eta) * mobility))
        viscous = 2 * h * h / (dim * nu_max) if nu_max > 0 else math.inf
        dt = self.config.cfl * min(acoustic, parabolic, viscous)
        if not math.isfinite(dt):
            raise EmptyState("state has neither transport nor diffusion to limit the step")
        return dt

    def _repair(self, state: FieldState, t: float) -> tuple[FieldState, RepairTotals]:
        cs, pen, vol = self.constitutive, self.penalty, self.grid.cell_volume
        rho = np.maximum(state.rho, 0.0)
        negative = state.rho < 0

        prim = self.primitives(FieldState(rho, state.m, state.w), t)
        blended = prim.blend >= 1.0
        m = np.where(blended, rho * prim.u, state.m)

        w_min = (rho + pen.delta) * cs.thermal_Q(THETA_FLOOR)
        cold = state.w < w_min
        w = np.maximum(state.w, w_min)

        totals = RepairTotals(
            mass=fsum(rho - state.rho) * vol,
            thermal=fsum(w - state.w) * vol,
            momentum=fsum(np.abs(m - state.m)) * vol,
            cells=int(np.count_nonzero(negative | cold)),
        )
        return FieldState(rho, m, w), totals

    def advance(self, state: FieldState, t: float, dt: float) -> StepRecord:
        """
        One step: SSP-RK2 over the explicit tendencies, the viscous substep
        and its heating, then the implicit penalty at ``t + dt``, then
        positivity repair.
        """
        prim0 = self.primitives(state, t)
        k0 = self.tendencies(state, prim0)
        s1 = state.advanced(k0, dt)
        prim1 = self.primitives(s1, t + dt)
        k1 = self.tendencies(s1, prim1)
        s2 = state.combine(s1.advanced(k1, dt), 0.5, 0.5)

        prim2 = self.primitives(s2, t + dt)
        m, viscous = self.viscous_step(s2.m, prim2, dt)
        heating = (1.0 - self.penalty.delta) * self.dissipation_density(prim2, viscous.velocity)
        m, released = self._penalize(m, s2.rho, t + dt, dt)
        repaired, totals = self._repair(FieldState(s2.rho, m, s2.w + dt * heating), t + dt)

        total_mass = fsum(repaired.rho) * self.grid.cell_volume
        if abs(totals.mass) > 1e-12 * max(total_mass, 1e-300):
            log.warning(f"t={t + dt:.6g}: positivity repair changed the mass by {totals.mass:.3e}")
        elif totals.cells:
            log.debug(
                f"t={t + dt:.6g}: repaired {totals.cells} cells "
                f"(mass {totals.mass:.3e}, thermal {totals.thermal:.3e})"
            )
        self._check_finite(repaired, t + dt)

        return StepRecord(
            t=t,
            dt=dt,
            before=state,
            state=repaired,
            stages=(Stage(state, prim0, k0), Stage(s1, prim1, k1)),
            viscous=viscous,
            penalty_dissipation=fsum(released) * self.grid.cell_volume,
            repair=totals,
        )

    def step(self, state: FieldState, t: float, dt: float) -> FieldState:
        return self.advance(state, t, dt).state

    @staticmethod
    def _check_finite(state: FieldState, t: float) -> None:
        for name, values in (("rho", state.rho), ("m", state.m), ("w", state.w)):
            if not np.all(np.isfinite(values)):
                raise BlowUp(t, f"{name} is not finite")
            peak = float(np.max(np.abs(values)))
            if peak > BLOWUP_LIMIT:
                raise BlowUp(t, f"|{name}| reached {peak:.3e}")

    # setup and driver

    def apply_initial_data(self, init: InitialData) -> FieldState:
        """
        Density ``init.density`` in ``Omega_0``, ramped to zero over two cells
        inside the boundary and rescaled to the mass of the sharp profile;
        momentum ``rho V(0)`` or zero; clipped temperature;
        ``w = (rho + delta) Q(theta)``.
        """
        grid, cs, pen = self.grid, self.constitutive, self.penalty
        x = grid.points
        phi0 = self.domain.level_set(0.0, x)
        h, vol = grid.h, grid.cell_volume

        target = fsum(np.where(phi0 < 0, init.density, 0.0)) * vol
        if not target > 0:
            raise BadConfig("initial density has no mass inside the fluid domain")
        rho = init.density * smootherstep(np.clip(-phi0 / (2 * h), 0.0, 1.0))
        rho *= target / (fsum(rho) * vol)

        if init.momentum == "carried":
            m = rho * self.domain.evaluate_V(0.0, x)
        else:
            m = grid.vector_zeros()

        theta = np.full(grid.shape, float(init.temperature))
        if init.bump_amplitude != 0:
            center = np.asarray(init.bump_center or (0.0,) * grid.dim, dtype=float)
            if center.size != grid.dim:
                raise BadConfig(f"bump_center needs {grid.dim} components")
            d2 = np.sum((x - center.reshape((grid.dim,) + (1,) * grid.dim)) ** 2, axis=0)
            theta = theta + init.bump_amplitude * np.exp(-d2 / (2 * init.bump_width**2))
        theta = np.clip(theta, init.theta_lower, init.theta_upper)

        return FieldState(rho, m, (rho + pen.delta) * cs.thermal_Q(theta))

    def check_hypotheses(self) -> None:
        report = validate_hypotheses(self.constitutive)
        self.penalty.check(self.constitutive.gamma)
        if report.passed:
            return
        names = ", ".join(c.name for c in report.failures)
        if not self.config.override_hypotheses:
            raise HypothesisViolation(f"constitutive hypotheses fail: {names}")
        log.warning(f"running despite failed hypotheses: {names}")

    def run(
        self,
        init: InitialData,
        on_row: Callable[[dict[str, float], FieldState, float], None] | None = None,
        on_step: Callable[[StepRecord], None] | None = None,
    ) -> "RunResult":
        """
        Advances the initial state to the end time, reporting a diagnostics
        row at every cadence tick and at the end time.
        """
        from .diagnostics import Monitor

        self.check_hypotheses()
        end = self.config.end_time
        self.domain.check_containment(end)

        state = self.apply_initial_data(init)
        monitor = Monitor(self, state)
        rows = [monitor.row(state, 0.0)]
        if on_row:
            on_row(rows[-1], state, 0.0)

        t, steps = 0.0, 0
        ticks = max(1, math.ceil(end / self.config.cadence - 1e-9)) if end > 0 else 0
        for k in range(1, ticks + 1):
            t_row = min(k * self.config.cadence, end)
            while t < t_row:
                dt = min(self.cfl_dt(state, t), t_row - t)
                if t_row - (t + dt) < 1e-12 * max(1.0, t_row):
                    dt = t_row - t
                record = self.advance(state, t, dt)
                monitor.record(record)
                if on_step:
                    on_step(record)
                state = record.state
                t = t_row if dt == t_row - t else t + dt
                steps += 1
            rows.append(monitor.row(state, t))
            log.info(
                f"t={t:.4g} ({steps} steps): mass={rows[-1]['total_mass']:.12g} "
                f"energy residual={rows[-1]['energy_residual']:.3e}"
            )
            if on_row:
                on_row(rows[-1], state, t)

        return RunResult(state, t, steps, rows, monitor.gates())


@dataclass
class RunResult:
    state: FieldState
    t: float
    steps: int
    rows: list[dict[str, float]]
    gates: Sequence["Gate"] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)

