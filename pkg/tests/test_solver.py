import math

import numpy as np
import pytest

from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from helpers import disk_domain, fluid_box
from nsf.constitutive import ConstitutiveSet, stress
from nsf.diagnostics import total_mass
from nsf.fields import Rest
from nsf.geometry import MovingDomain, PenaltyParams
from nsf.laws import PowerLaw
from nsf.shapes import HalfSpace
from nsf.solver import VISCOUS_ITERATIONS, FieldState, InitialData, Solver, SolverConfig, ViscousStep, relax_normal
from nsf.util import BadConfig, BlowUp, EmptyState, HypothesisViolation

# constant heat capacity and conductivity, no thermal pressure: w = (rho + delta) theta
LINEAR_HEAT = ConstitutiveSet(
    p_theta=PowerLaw(), c_v=PowerLaw([(1.0, 0.0)]), kappa=PowerLaw([(1.0, 0.0)])
)


def box_solver(cells: int = 16, cs: ConstitutiveSet | None = None, **config: object) -> Solver:
    domain = fluid_box()
    return Solver(domain.grid(cells), domain, cs or ConstitutiveSet(), PenaltyParams(), SolverConfig(**config))


def disk_solver(cells: int = 32, field: str = "rest", **params: tuple[float, ...]) -> Solver:
    domain = disk_domain(field, **params)
    cs = ConstitutiveSet(rho_vacuum=1e-3)
    return Solver(domain.grid(cells), domain, cs, PenaltyParams(nu=1e-2, delta=0.1), SolverConfig())


def make_state(solver: Solver, rho: np.ndarray, u: np.ndarray, theta: np.ndarray) -> FieldState:
    grid, delta = solver.grid, solver.penalty.delta
    rho = np.broadcast_to(rho, grid.shape).astype(float)
    u = np.broadcast_to(u, (grid.dim, *grid.shape)).astype(float)
    theta = np.broadcast_to(theta, grid.shape).astype(float)
    return FieldState(rho, rho * u, (rho + delta) * solver.constitutive.thermal_Q(theta))


def uniform_state(solver: Solver, theta: float = 1.0) -> FieldState:
    u = np.zeros((solver.grid.dim,) + (1,) * solver.grid.dim)
    return make_state(solver, np.ones(solver.grid.shape), u, np.full(solver.grid.shape, theta))


class TestRelaxNormal:
    def test_halves_mismatch(self):
        m = np.array([[2.0, -1.0], [3.0, 0.5]])
        rho = np.ones(2)
        normal = np.array([[1.0, 1.0], [0.0, 0.0]])
        m_new, released = relax_normal(m, rho, np.zeros((2, 2)), normal, np.ones(2), 1.0, 1.0)
        assert_allclose(m_new[0], [1.0, -0.5])
        assert_allclose(m_new[1], m[1])
        assert_allclose(released, 0.5 * (1 - 0.25) * np.array([4.0, 1.0]))

    def test_unweighted(self):
        m = np.array([[2.0], [0.0]])
        rho = np.array([2.0])
        normal = np.array([[1.0], [0.0]])
        m_new, _ = relax_normal(m, rho, np.zeros((2, 1)), normal, np.ones(1), 1.0, 1.0, weighted=False)
        # mismatch 1, stiffness 1 / rho = 0.5
        assert_allclose(m_new[0], 2.0 * (1 / 1.5))

    @given(
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(0.1, 10),
        st.floats(0.0, 100),
        st.floats(1e-8, 1.0),
    )
    def test_releases_energy(self, u, v, rho, sigma, eps):
        m = np.array([[rho * u], [rho * v]])
        normal = np.array([[0.6], [0.8]])
        m_new, released = relax_normal(m, np.array([rho]), np.zeros((2, 1)), normal, np.array([sigma]), 0.01, eps)
        assert released[0] >= 0
        tangent = np.array([-0.8, 0.6])
        assert m_new[:, 0] @ tangent == pytest.approx(m[:, 0] @ tangent, abs=1e-9)
        before = abs(m[:, 0] @ normal[:, 0])
        assert abs(m_new[:, 0] @ normal[:, 0]) <= before + 1e-12

    def test_solver_penalty_acts_on_band_only(self):
        solver = disk_solver()
        x = solver.grid.points
        rho = np.ones(solver.grid.shape)
        m = x / np.sqrt(np.sum(x * x, axis=0))
        geo = solver.domain.snapshot(0.0, solver.grid)
        out = solver.apply_penalty_implicit(m, rho, 0.0, 0.01)

        band = geo.delta > 0
        assert np.any(band)
        np.testing.assert_array_equal(out[:, ~band], m[:, ~band])
        before = np.abs(np.sum(m * geo.normal, axis=0))[band]
        after = np.abs(np.sum(out * geo.normal, axis=0))[band]
        assert np.all(after <= before + 1e-15)
        assert np.max(before - after) > 0.1


class TestTendencies:
    def test_static_state_is_stationary(self):
        solver = box_solver()
        state = uniform_state(solver)
        prim = solver.primitives(state, 0.0)
        assert np.all(solver.continuity_rhs(state, 0.0, prim) == 0)
        assert np.all(solver.momentum_rhs(state, 0.0, prim) == 0)

    def test_hydrostatic_pressure_gradient(self):
        solver = box_solver()
        p = np.full(solver.grid.shape, 3.7)
        assert float(np.max(np.abs(solver.centered_gradient(p)))) <= 1e-12

    def test_linear_pressure_gradient(self):
        solver = box_solver()
        x, y = solver.grid.points
        grad = solver.centered_gradient(2.0 * x - y)
        assert_allclose(grad[0][1:-1, 1:-1], 2.0, rtol=1e-12)
        assert_allclose(grad[1][1:-1, 1:-1], -1.0, rtol=1e-12)

    def test_viscous_stress_linear_exact(self):
        solver = box_solver()
        A = np.array([[0.3, -0.7], [1.1, 0.2]])
        x = solver.grid.points
        u = np.einsum("ij,j...->i...", A, x)
        state = make_state(solver, np.ones(solver.grid.shape), u, np.ones(solver.grid.shape))
        prim = solver.primitives(state, 0.0)
        expected = stress(A, solver.constitutive.mu, solver.constitutive.eta, 2)
        S, G = solver.viscous_terms(prim)
        inner = S[:, :, 1:-1, 1:-1]
        assert_allclose(inner, np.broadcast_to(expected[:, :, None, None], inner.shape), atol=1e-12)
        assert_allclose(G[:, :, 1:-1, 1:-1], np.broadcast_to(A[:, :, None, None], inner.shape), atol=1e-12)
        force = solver.viscous_force(prim)
        assert float(np.max(np.abs(force[:, 2:-2, 2:-2]))) <= 1e-12

    def test_pressure_force_pairs_with_mass_flux(self):
        solver = disk_solver(field="rotation", rate=(1.0,))
        state = solver.apply_initial_data(InitialData(bump_amplitude=0.3))
        prim = solver.primitives(state, 0.0)
        cs, pen = solver.constitutive, solver.penalty
        g = cs.enthalpy(prim.rho, pen.delta, pen.beta)
        thermal = prim.theta * cs.p_theta(prim.rho)
        power = np.sum(prim.u * solver.pressure_force(prim))
        div_m = np.trace(solver.cell_gradient(prim.rho * prim.u), axis1=0, axis2=1)
        div_su = np.trace(prim.grad_su, axis1=0, axis2=1)
        assert power == pytest.approx(float(np.sum(g * div_m + thermal * div_su)), rel=1e-10, abs=1e-10)

    def test_viscous_force_dual_to_dissipation(self):
        solver = disk_solver(field="rotation", rate=(1.0,))
        state = solver.apply_initial_data(InitialData())
        prim = solver.primitives(state, 0.0)
        power = float(np.sum(prim.u * solver.viscous_force(prim)))
        dissipation = float(np.sum(solver.dissipation_density(prim)))
        assert dissipation > 0
        assert power == pytest.approx(-dissipation, rel=1e-10)

    def test_cell_gradient_no_slip(self):
        solver = box_solver()
        u = np.ones((2, *solver.grid.shape))
        G = solver.cell_gradient(u)
        # ghosts carry -u, so the wall cells see a jump
        assert np.all(G[0, 0][0] > 0) and np.all(G[0, 0][-1] < 0)
        assert np.all(G[0, 0][1:-1] == 0)

    @pytest.mark.parametrize("cells", [32, 64])
    def test_heat_operator_eigenmode(self, cells):
        solver = box_solver(cells, LINEAR_HEAT)
        grid, delta = solver.grid, solver.penalty.delta
        L, h = grid.half_width, grid.h
        k = math.pi / L
        x, y = grid.points
        mode = np.cos(k * x) * np.cos(k * y)
        theta = 1.0 + 0.1 * mode
        state = make_state(solver, np.ones(grid.shape), np.zeros((2, 1, 1)), theta)
        rhs = solver.thermal_rhs(state, 0.0)
        eigen = -2 * (4 / h**2) * math.sin(k * h / 2) ** 2
        expected = 0.1 * eigen * mode - delta * theta ** (solver.constitutive.alpha + 1)
        assert_allclose(rhs, expected, atol=1e-8)

    def test_heat_operator_second_order(self):
        errors = []
        for cells in (32, 64):
            solver = box_solver(cells, LINEAR_HEAT)
            grid, delta = solver.grid, solver.penalty.delta
            k = math.pi / grid.half_width
            x, y = grid.points
            theta = 1.0 + 0.1 * np.cos(k * x) * np.cos(k * y)
            state = make_state(solver, np.ones(grid.shape), np.zeros((2, 1, 1)), theta)
            rhs = solver.thermal_rhs(state, 0.0) + delta * theta ** (solver.constitutive.alpha + 1)
            exact = -2 * k * k * (theta - 1.0)
            errors.append(float(np.max(np.abs(rhs - exact))))
        assert errors[0] / errors[1] > 3.5


class TestTimeStep:
    def test_cfl_limits(self):
        solver = box_solver()
        cs, pen, h = solver.constitutive, solver.penalty, solver.grid.h
        c = float(cs.sound_speed(1.0, 1.0, pen.delta, pen.beta))
        diffusivity = float(cs.kappa(1.0)) / ((1.0 + pen.delta) * float(cs.c_v(1.0)))
        viscous = 2 * h * h / (2 * (2 * cs.mu + cs.eta))
        expected = 0.4 * min(h / c, h * h / (4 * diffusivity), viscous)
        assert solver.cfl_dt(uniform_state(solver)) == pytest.approx(expected, rel=1e-9)

    def test_independent_of_eps(self):
        soft = disk_solver()
        domain = soft.domain
        stiff = Solver(soft.grid, domain, soft.constitutive, PenaltyParams(eps=1e-8, nu=1e-2, delta=0.1))
        state = soft.apply_initial_data(InitialData())
        assert soft.cfl_dt(state) == stiff.cfl_dt(state)

    def test_empty_state(self):
        solver = box_solver()
        empty = FieldState(np.zeros((0, 0)), np.zeros((2, 0, 0)), np.zeros((0, 0)))
        with pytest.raises(EmptyState):
            solver.cfl_dt(empty)

    def test_non_finite_state(self):
        solver = box_solver()
        state = uniform_state(solver)
        state.rho[3, 3] = math.nan
        with pytest.raises(EmptyState):
            solver.cfl_dt(state)

    def test_blow_up(self):
        solver = box_solver()
        state = uniform_state(solver)
        state.m[0, 1, 1] = math.inf
        with pytest.raises(BlowUp) as info:
            solver._check_finite(state, 0.25)
        assert info.value.exit_code == 3


class TestInitialData:
    def test_mass_of_sharp_profile(self):
        solver = disk_solver()
        state = solver.apply_initial_data(InitialData(density=2.0))
        phi = solver.domain.level_set(0.0, solver.grid.points)
        sharp = 2.0 * np.count_nonzero(phi < 0) * solver.grid.cell_volume
        assert total_mass(state, solver.grid) == pytest.approx(sharp, rel=1e-12)
        assert np.all(state.rho[phi >= 0] == 0)
        assert np.all(state.rho >= 0)

    def test_carried_momentum(self):
        solver = disk_solver(field="rotation", rate=(1.0,))
        state = solver.apply_initial_data(InitialData())
        V = solver.domain.evaluate_V(0.0, solver.grid.points)
        assert_allclose(state.m, state.rho * V)
        zero = solver.apply_initial_data(InitialData(momentum="zero"))
        assert np.all(zero.m == 0)

    def test_temperature_clipped(self):
        solver = box_solver()
        init = InitialData(temperature=0.5, bump_amplitude=100.0, bump_width=0.3, theta_upper=2.0)
        state = solver.apply_initial_data(init)
        theta = solver.primitives(state, 0.0).theta
        assert float(np.max(theta)) == pytest.approx(2.0, rel=1e-10)
        assert float(np.min(theta)) == pytest.approx(0.5, rel=1e-10)

    def test_bump_center_dimension(self):
        with pytest.raises(BadConfig):
            box_solver().apply_initial_data(InitialData(bump_amplitude=1.0, bump_center=(0.0, 0.0, 0.0)))

    def test_no_fluid(self):
        domain = MovingDomain(Rest(1.0, 2), HalfSpace(2, offset=(-100.0,)))
        solver = Solver(domain.grid(16), domain, ConstitutiveSet(), PenaltyParams())
        with pytest.raises(BadConfig):
            solver.apply_initial_data(InitialData())

    def test_dimension_mismatch(self):
        domain = fluid_box(dim=2)
        with pytest.raises(BadConfig):
            Solver(fluid_box(dim=3).grid(16), domain, ConstitutiveSet(), PenaltyParams())


class TestAdvance:
    def test_static_fields_unchanged(self):
        solver = box_solver()
        state = uniform_state(solver)
        record = solver.advance(state, 0.0, solver.cfl_dt(state))
        assert np.all(record.state.rho == state.rho)
        assert np.all(record.state.m == 0)
        assert record.penalty_dissipation == 0
        assert record.repair.cells == 0

    def test_mass_accounting(self):
        solver = disk_solver(field="rotation", rate=(1.0,))
        state = solver.apply_initial_data(InitialData())
        mass0 = total_mass(state, solver.grid)
        t = 0.0
        for _ in range(3):
            dt = solver.cfl_dt(state, t)
            record = solver.advance(state, t, dt)
            mass1 = total_mass(record.state, solver.grid)
            assert mass1 - record.repair.mass == pytest.approx(mass0, rel=1e-12)
            assert record.penalty_dissipation >= 0
            assert np.all(record.state.rho >= 0)
            state, t, mass0 = record.state, t + dt, mass1

    def test_penalty_applied_after_explicit_stages(self, monkeypatch):
        solver = disk_solver()
        grid = solver.grid
        u = np.array([1.0, 0.0]).reshape(2, 1, 1)
        state = make_state(solver, np.ones(grid.shape), u, np.ones(grid.shape))

        def frozen(s: FieldState, prim: object) -> FieldState:
            return FieldState(np.zeros_like(s.rho), np.zeros_like(s.m), np.zeros_like(s.w))

        monkeypatch.setattr(solver, "tendencies", frozen)
        monkeypatch.setattr(solver, "viscous_step", lambda m, prim, dt: (m, ViscousStep(prim, prim.u, 0)))
        dt = 0.01
        record = solver.advance(state, 0.0, dt)
        geo = solver.domain.snapshot(dt, grid)
        expected, released = relax_normal(
            state.m, state.rho, geo.V, geo.normal, geo.delta, dt, solver.penalty.eps
        )
        untouched = solver.primitives(record.state, dt).blend == 0
        assert_allclose(record.state.m[:, untouched], expected[:, untouched], atol=1e-14)
        assert record.penalty_dissipation == pytest.approx(float(np.sum(released)) * grid.cell_volume, rel=1e-12)
        assert record.penalty_dissipation > 0

    def test_viscous_step_removes_its_dissipation(self):
        solver = disk_solver(field="rotation", rate=(1.0,))
        state = solver.apply_initial_data(InitialData())
        prim = solver.primitives(state, 0.0)
        dt = solver.cfl_dt(state, 0.0, prim)
        m, step = solver.viscous_step(state.m, prim, dt)
        assert 0 < step.iterations < VISCOUS_ITERATIONS

        filled = prim.rho > 0
        u = prim.u + np.where(filled, (m - state.m) / np.where(filled, prim.rho, 1.0), 0.0)
        assert_allclose(0.5 * (prim.u + u), step.velocity, atol=1e-11)
        vol = solver.grid.cell_volume
        loss = 0.5 * float(np.sum(prim.rho * (np.sum(prim.u**2, axis=0) - np.sum(u**2, axis=0)))) * vol
        heat = dt * float(np.sum(solver.dissipation_density(prim, step.velocity))) * vol
        assert heat > 0
        assert loss == pytest.approx(heat, rel=1e-8)

    def test_velocity_bounded_near_vacuum(self):
        solver = disk_solver(field="rotation", rate=(1.0,))
        state = solver.apply_initial_data(InitialData())
        prim = solver.primitives(state, 0.0)
        bound = 10.0 * float(np.max(np.abs(prim.geometry.V)) + np.max(prim.sound))
        dt0 = solver.cfl_dt(state)
        t = 0.0
        for _ in range(40):
            dt = solver.cfl_dt(state, t)
            assert dt >= 0.25 * dt0
            state, t = solver.step(state, t, dt), t + dt
            prim = solver.primitives(state, t)
            assert float(np.max(np.abs(prim.u))) <= bound

    def test_stiff_penalty_enforces_normal_velocity(self):
        domain = disk_domain()
        solver = Solver(
            domain.grid(32),
            domain,
            ConstitutiveSet(rho_vacuum=1e-3),
            PenaltyParams(eps=1e-8, nu=1e-2, delta=0.1),
        )
        grid = solver.grid
        u = np.array([1.0, 0.0]).reshape(2, 1, 1)
        state = make_state(solver, np.ones(grid.shape), u, np.ones(grid.shape))
        dt = solver.cfl_dt(state)
        new = solver.step(state, 0.0, dt)
        geo = solver.domain.snapshot(dt, grid)
        band = geo.delta > 0.1 * float(np.max(geo.delta))
        normal_momentum = np.sum(new.m * geo.normal, axis=0)
        assert float(np.max(np.abs(normal_momentum[band]))) < 1e-2


class TestHypothesisCheck:
    def test_rejects_failing_set(self):
        solver = box_solver(cs=ConstitutiveSet(alpha=4.0))
        with pytest.raises(HypothesisViolation) as info:
            solver.check_hypotheses()
        assert info.value.exit_code == 4
        assert "conductivity exponent" in str(info.value)

    def test_override(self):
        box_solver(cs=ConstitutiveSet(alpha=4.0), override_hypotheses=True).check_hypotheses()

    def test_penalty_checked(self):
        domain = fluid_box()
        solver = Solver(domain.grid(16), domain, ConstitutiveSet(), PenaltyParams(beta=3.0))
        with pytest.raises(BadConfig):
            solver.check_hypotheses()


class TestRun:
    def test_zero_end_time(self):
        result = box_solver(end_time=0.0).run(InitialData(momentum="zero", temperature=1.0))
        assert result.steps == 0
        assert result.t == 0.0
        assert len(result.rows) == 1
        assert result.passed

    def test_rows_at_cadence(self):
        solver = box_solver(end_time=0.025, cadence=0.01)
        seen = []
        result = solver.run(
            InitialData(momentum="zero", temperature=1.0),
            on_row=lambda row, state, t: seen.append(t),
        )
        assert seen == [0.0, 0.01, 0.02, 0.025]
        assert [row["t"] for row in result.rows] == seen
        assert result.t == 0.025
        assert result.steps >= 3

    def test_static_run_conserves(self):
        solver = box_solver(end_time=0.02, cadence=0.01)
        result = solver.run(InitialData(momentum="zero", temperature=1.0))
        masses = [row["total_mass"] for row in result.rows]
        assert max(masses) - min(masses) <= 1e-12 * masses[0]
        assert all(row["kinetic_energy"] == 0 for row in result.rows)
        # the artificial cooling term only removes heat
        thermal = [row["thermal_energy"] for row in result.rows]
        assert thermal == sorted(thermal, reverse=True)
        assert result.passed, [(g.name, g.value, g.limit) for g in result.gates]

    def test_on_step(self):
        solver = box_solver(end_time=0.01, cadence=0.01)
        records = []
        result = solver.run(InitialData(momentum="zero", temperature=1.0), on_step=records.append)
        assert len(records) == result.steps
        assert sum(r.dt for r in records) == pytest.approx(0.01, rel=1e-12)
