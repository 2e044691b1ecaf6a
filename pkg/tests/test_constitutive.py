import math

import numpy as np
import pytest

from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from nsf.constitutive import ConstitutiveSet, h_condition, stress, validate_hypotheses
from nsf.laws import PowerLaw
from nsf.util import BadExponent, NegativeInput

finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)


def failed(cs: ConstitutiveSet) -> set[str]:
    return {c.name for c in validate_hypotheses(cs).failures}


class TestPressure:
    def test_vacuum(self, default_set):
        assert float(default_set.pressure(0.0, 5.0)) == 0.0

    def test_cold(self, default_set):
        assert float(default_set.pressure(1.0, 0.0)) == 1.0

    def test_state_equation(self, default_set):
        assert float(default_set.pressure(8.0, 2.0)) == pytest.approx(72.0, rel=1e-14)

    def test_artificial(self, default_set):
        assert float(default_set.artificial_pressure(1.0, 0.0, 0.1, 5.0)) == pytest.approx(1.1, rel=1e-14)
        assert float(default_set.artificial_pressure(0.0, 0.0, 0.3, 5.0)) == 0.0

    @given(st.floats(0.0, 100.0), st.floats(0.0, 100.0))
    def test_artificial_without_delta(self, rho, theta):
        laws = ConstitutiveSet()
        assert laws.artificial_pressure(rho, theta, 0.0, 5.0) == laws.pressure(rho, theta)

    def test_negative_input(self, default_set):
        with pytest.raises(NegativeInput):
            default_set.pressure(-1.0, 1.0)
        with pytest.raises(NegativeInput):
            default_set.pressure(1.0, np.array([1.0, -1e-3]))

    def test_sound_speed(self, default_set):
        # p' = 2 rho + (2/3) theta rho^(-1/3) + delta beta rho^(beta - 1)
        c = default_set.sound_speed(1.0, 3.0, 0.1, 5.0)
        assert float(c) == pytest.approx(math.sqrt(2.0 + 2.0 + 0.5), rel=1e-13)
        assert float(default_set.sound_speed(2.0, 0.0)) == pytest.approx(2.0, rel=1e-14)

    def test_sound_speed_at_vacuum_is_finite(self, default_set):
        assert np.isfinite(default_set.sound_speed(0.0, 1.0, 0.1, 5.0))


class TestPotentials:
    def test_elastic_potential(self, default_set):
        assert float(default_set.elastic_potential(1.0)) == 0.0
        assert float(default_set.elastic_potential(2.0)) == pytest.approx(1.0, rel=1e-14)
        assert float(default_set.elastic_potential(0.5)) == pytest.approx(-0.5, rel=1e-14)

    def test_thermal_Q(self, default_set):
        assert float(default_set.thermal_Q(0.0)) == 0.0
        assert float(default_set.thermal_Q(1.0)) == pytest.approx(4 / 3, rel=1e-14)
        assert float(default_set.thermal_Q(2.0)) == pytest.approx(14 / 3, rel=1e-14)

    def test_conductivity_primitive(self, default_set):
        assert float(default_set.conductivity_primitive(0.0)) == 0.0
        assert float(default_set.conductivity_primitive(1.0)) == pytest.approx(8 / 7, rel=1e-14)
        assert float(default_set.conductivity_primitive(2.0)) == pytest.approx(2 + 128 / 7, rel=1e-14)

    def test_closed_forms_on_samples(self, default_set):
        rng = np.random.default_rng(0)
        x = 10 ** rng.uniform(-3, 2, size=100)
        assert_allclose(default_set.elastic_potential(x), x - 1, rtol=1e-10, atol=1e-14)
        assert_allclose(default_set.thermal_Q(x), x + x**3 / 3, rtol=1e-10)
        assert_allclose(default_set.conductivity_primitive(x), x + x**7 / 7, rtol=1e-10)
        assert_allclose(default_set.invert_Q(x + x**3 / 3), x, rtol=1e-10)

    def test_invert_Q_examples(self, default_set):
        assert default_set.invert_Q(0.0) == 0.0
        assert default_set.invert_Q(4 / 3) == pytest.approx(1.0, rel=1e-12)
        assert default_set.invert_Q(14 / 3) == pytest.approx(2.0, rel=1e-12)

    @given(st.floats(0.0, 100.0))
    def test_invert_Q_round_trip(self, theta):
        laws = ConstitutiveSet()
        assert laws.invert_Q(laws.thermal_Q(theta)) == pytest.approx(theta, rel=1e-10, abs=1e-10)

    def test_invert_Q_residual(self, default_set):
        q = np.logspace(-8, 8, 50)
        theta = default_set.invert_Q(q)
        assert np.all(np.abs(default_set.thermal_Q(theta) - q) <= 1e-12 * np.maximum(1.0, q))

    def test_negative_thermal_energy(self, default_set):
        with pytest.raises(NegativeInput):
            default_set.invert_Q(-1.0)
        with pytest.raises(NegativeInput):
            default_set.thermal_Q(-1.0)
        with pytest.raises(NegativeInput):
            default_set.conductivity_primitive(-0.1)

    def test_internal_energy(self, default_set):
        assert float(default_set.internal_energy(2.0, 1.0)) == pytest.approx(1.0 + 4 / 3, rel=1e-14)

    def test_elastic_density_vanishes_at_vacuum(self, default_set):
        assert float(default_set.elastic_density(0.0)) == 0.0

    def test_elastic_potential_second_derivative(self):
        cs = ConstitutiveSet(p_e=PowerLaw([(1.0, 2.0), (0.5, 3.0)]))
        rho = np.linspace(0.5, 3.0, 11)
        d = 1e-3

        def f(r: np.ndarray) -> np.ndarray:
            return r * cs.elastic_potential(r)

        second = (f(rho + d) - 2 * f(rho) + f(rho - d)) / (d * d)
        assert_allclose(second, cs.p_e.derivative(rho) / rho, rtol=1e-6)

    def test_enthalpy_is_energy_derivative(self):
        cs = ConstitutiveSet(p_e=PowerLaw([(1.0, 2.0), (0.5, 3.0)]))
        delta, beta = 0.1, 5.0
        rho = np.linspace(0.2, 3.0, 15)
        d = 1e-5

        def energy(r: np.ndarray) -> np.ndarray:
            return cs.elastic_density(r) + delta / (beta - 1) * r**beta

        def pressure(r: np.ndarray) -> np.ndarray:
            return cs.p_e(r) + delta * r**beta

        g = cs.enthalpy(rho, delta, beta)
        assert_allclose(g, (energy(rho + d) - energy(rho - d)) / (2 * d), rtol=1e-7)
        slope = (cs.enthalpy(rho + d, delta, beta) - cs.enthalpy(rho - d, delta, beta)) / (2 * d)
        assert_allclose(rho * slope, (pressure(rho + d) - pressure(rho - d)) / (2 * d), rtol=1e-6)

    def test_enthalpy_at_vacuum(self, default_set):
        # rho P_e = rho^2 - rho for p_e = rho^2
        assert float(default_set.enthalpy(0.0, 0.1, 5.0)) == pytest.approx(-1.0, rel=1e-14)
        assert np.isfinite(default_set.enthalpy(np.array([0.0, 1e-300]), 0.1, 5.0)).all()


class TestRenormalisation:
    def test_zero_temperature(self, default_set):
        Q_h, K_h, h = default_set.renorm_pair(0.0, 0.5)
        assert (float(Q_h), float(K_h), float(h)) == (0.0, 0.0, 1.0)

    def test_small_exponent_limit(self, default_set):
        theta = np.array([0.5, 1.0, 2.0])
        Q_h, K_h, _ = default_set.renorm_pair(theta, 1e-9)
        assert_allclose(Q_h, default_set.thermal_Q(theta), rtol=1e-8)
        assert_allclose(K_h, default_set.conductivity_primitive(theta), rtol=1e-8)

    def test_quadrature_closed_form(self, default_set):
        # int_0^1 (1 + s^2) (1 + s)^(-1/2) ds with u = 1 + s
        def F(u: float) -> float:
            return 0.4 * u**2.5 - 4 / 3 * u**1.5 + 4 * u**0.5

        Q_h, _, h = default_set.renorm_pair(1.0, 0.5)
        assert float(Q_h) == pytest.approx(F(2.0) - F(1.0), rel=1e-10)
        assert float(h) == pytest.approx(2**-0.5, rel=1e-15)

    def test_bounded_and_monotone(self, default_set):
        theta = np.array([0.1, 0.5, 1.0, 2.0, 4.0])
        Q_h, K_h, _ = default_set.renorm_pair(theta, 0.5)
        assert np.all(Q_h <= default_set.thermal_Q(theta))
        assert np.all(K_h <= default_set.conductivity_primitive(theta))
        assert np.all(np.diff(Q_h) > 0) and np.all(np.diff(K_h) > 0)

    @pytest.mark.parametrize("z", [0.0, 1.0, 1.5, -0.2])
    def test_bad_exponent(self, default_set, z):
        with pytest.raises(BadExponent):
            default_set.renorm_pair(1.0, z)

    @pytest.mark.parametrize("z", [0.1, 0.5, 0.9])
    def test_h_condition(self, z):
        theta = np.logspace(-6, 6, 241)
        value = h_condition(theta, z)
        assert np.all(value >= 0)
        assert_allclose(value, z * (1 - z) * (1 + theta) ** (-2 * z - 2), rtol=1e-12)


class TestStress:
    def test_zero_gradient(self):
        assert_allclose(stress(np.zeros((2, 2)), 1.0, 0.5, 2), 0.0)

    def test_pure_strain_2d(self):
        S = stress(np.diag([1.0, -1.0]), 1.0, 0.0, 2)
        assert_allclose(S, np.diag([2.0, -2.0]), rtol=0, atol=0)

    def test_expansion_3d(self):
        assert_allclose(stress(np.eye(3), 1.0, 0.0, 3), 0.0, atol=1e-15)

    def test_cellwise(self):
        G = np.zeros((2, 2, 4, 5))
        G[0, 1] = 1.0
        S = stress(G, np.full((4, 5), 2.0), 0.0, 2)
        assert_allclose(S[0, 1], 2.0)
        assert_allclose(S[1, 0], 2.0)
        assert_allclose(S[0, 0], 0.0)

    @given(st.sampled_from([2, 3]).flatmap(lambda d: arrays(float, (d, d), elements=finite)), st.floats(0.0, 5.0))
    def test_trace(self, G, eta):
        dim = G.shape[0]
        S = stress(G, 1.3, eta, dim)
        assert np.trace(S) == pytest.approx(dim * eta * np.trace(G), abs=1e-10)

    @given(st.sampled_from([2, 3]).flatmap(lambda d: arrays(float, (d, d), elements=finite)), st.floats(0.0, 5.0))
    def test_dissipative(self, G, eta):
        S = stress(G, 0.7, eta, G.shape[0])
        assert np.sum(S * G) >= -1e-10 * max(1.0, float(np.sum(G * G)))


class TestHypotheses:
    def test_defaults_pass(self, default_set):
        report = validate_hypotheses(default_set)
        assert report.passed, [c.detail for c in report.failures]
        assert report.tightest_c == pytest.approx(1.0)

    def test_low_alpha(self):
        assert "conductivity exponent" in failed(ConstitutiveSet(alpha=4.0))

    def test_alpha_too_small_for_gamma(self):
        cs = ConstitutiveSet(alpha=4.0, gamma=3.0)
        assert "conductivity exponent" in failed(cs)

    def test_decreasing_thermal_pressure(self):
        assert "thermal pressure" in failed(ConstitutiveSet(p_theta=PowerLaw([(-1.0, 1.0)])))

    def test_thermal_pressure_constant(self):
        report = validate_hypotheses(ConstitutiveSet(p_theta=PowerLaw([(0.5, 2 / 3)])))
        assert report.passed
        assert report.tightest_c == pytest.approx(0.5)
        too_steep = ConstitutiveSet(p_theta=PowerLaw([(3.0, 2 / 3)]))
        assert failed(too_steep) == {"thermal pressure"}

    def test_small_gamma(self):
        assert "gamma" in failed(ConstitutiveSet(gamma=1.4))

    def test_conductivity_sandwich(self):
        assert "heat conductivity" in failed(ConstitutiveSet(kappa=PowerLaw([(1.0, 0.0)])))

    def test_heat_capacity_sandwich(self):
        assert "heat capacity" in failed(ConstitutiveSet(c_v=PowerLaw([(1.0, 0.0), (1.0, 4.0)])))

    def test_zero_thermal_pressure(self):
        assert validate_hypotheses(ConstitutiveSet(p_theta=PowerLaw())).passed

    def test_report_is_iterable(self, default_set):
        names = [c.name for c in validate_hypotheses(default_set)]
        assert names == [
            "gamma",
            "pressure growth",
            "thermal pressure",
            "heat conductivity",
            "heat capacity",
            "conductivity exponent",
        ]
