import logging

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from scipy.integrate import quad

from .law import ArrayLike, Law
from .laws import PowerLaw
from .util import BadExponent, NegativeInput

log = logging.getLogger("nsf.constitutive")

#: Relative tolerance of adaptive quadrature.
QUAD_RTOL = 1e-10

#: Newton tolerance of :func:`ConstitutiveSet.invert_Q`, relative to ``max(1, q)``.
INVERT_TOL = 1e-12

#: Slack applied to sampled inequality checks.
CHECK_TOL = 1e-12


def samples(count: int = 241) -> np.ndarray:
    """Logarithmic sample grid over ``[1e-6, 1e6]`` used by the validators."""
    return np.logspace(-6.0, 6.0, count)


def _nonnegative(what: str, value: ArrayLike) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0):
        raise NegativeInput(f"{what} must be nonnegative, got min {float(np.min(arr))!r}")
    return arr


@dataclass(frozen=True)
class ConstitutiveSet:
    """
    State equation ``p = p_e(rho) + theta p_theta(rho)``, heat capacity
    ``c_v``, conductivity ``kappa``, viscosities ``mu``, ``eta`` and boundary
    friction ``zeta``, together with the constants of the structural bounds
    checked by :func:`validate_hypotheses`.

    The defaults are the power laws ``p_e = rho^2``, ``p_theta = rho^(2/3)``,
    ``c_v = 1 + theta^2`` and ``kappa = 1 + theta^6`` with ``gamma = 2`` and
    ``alpha = 6``, which pass every check.
    """

    gamma: float = 2.0
    alpha: float = 6.0
    mu: float = 1.0
    eta: float = 0.0
    zeta: float = 0.0
    p_e: Law = field(default_factory=lambda: PowerLaw([(1.0, 2.0)]))
    p_theta: Law = field(default_factory=lambda: PowerLaw([(1.0, 2.0 / 3.0)]))
    c_v: Law = field(default_factory=lambda: PowerLaw([(1.0, 0.0), (1.0, 2.0)]))
    kappa: Law = field(default_factory=lambda: PowerLaw([(1.0, 0.0), (1.0, 6.0)]))
    a1: float = 1.0
    a2: float = 2.0
    b: float = 1.0
    k1: float = 0.5
    k2: float = 2.0
    c_lower: float = 0.5
    c_upper: float = 2.0
    c_theta: float = 1.0

    #: Densities below this value use it when differentiating the pressure.
    rho_vacuum: float = 1e-6

    def pressure(self, rho: ArrayLike, theta: ArrayLike) -> np.ndarray:
        rho = _nonnegative("density", rho)
        theta = _nonnegative("temperature", theta)
        return self.p_e(rho) + theta * self.p_theta(rho)

    def artificial_pressure(
        self, rho: ArrayLike, theta: ArrayLike, delta: float, beta: float
    ) -> np.ndarray:
        _nonnegative("delta", delta)
        rho = np.asarray(rho, dtype=float)
        return self.pressure(rho, theta) + delta * rho**beta

    def pressure_slope(
        self, rho: ArrayLike, theta: ArrayLike, delta: float, beta: float
    ) -> np.ndarray:
        """``d p_delta / d rho``, evaluated at ``max(rho, rho_vacuum)``."""
        r = np.maximum(np.asarray(rho, dtype=float), self.rho_vacuum)
        theta = np.asarray(theta, dtype=float)
        return self.p_e.derivative(r) + theta * self.p_theta.derivative(r) + delta * beta * r ** (beta - 1)

    def sound_speed(
        self, rho: ArrayLike, theta: ArrayLike, delta: float = 0.0, beta: float = 5.0
    ) -> np.ndarray:
        return np.sqrt(np.maximum(self.pressure_slope(rho, theta, delta, beta), 0.0))

    def elastic_potential(self, rho: ArrayLike) -> np.ndarray:
        """``P_e(rho) = int_1^rho p_e(z) / z^2 dz``."""
        rho = _nonnegative("density", rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.p_e.integrate(1.0, rho, power=-2.0)

    def elastic_density(self, rho: ArrayLike) -> np.ndarray:
        """``rho P_e(rho)``, continued by 0 at vacuum."""
        rho = _nonnegative("density", rho)
        positive = rho > 0
        safe = np.where(positive, rho, 1.0)
        return np.where(positive, safe * self.elastic_potential(safe), 0.0)

    def enthalpy(self, rho: ArrayLike, delta: float, beta: float) -> np.ndarray:
        """
        Derivative of the barotropic energy density
        ``rho P_e(rho) + delta / (beta - 1) rho^beta``, so that
        ``rho grad g = grad (p_e + delta rho^beta)``. Finite at vacuum.
        """
        rho = _nonnegative("density", rho)
        r = np.maximum(rho, np.finfo(float).tiny)
        return (
            self.elastic_potential(r)
            + self.p_e(r) / r
            + delta * beta / (beta - 1) * r ** (beta - 1)
        )

    def thermal_Q(self, theta: ArrayLike) -> np.ndarray:
        theta = _nonnegative("temperature", theta)
        return self.c_v.integrate(0.0, theta)

    def conductivity_primitive(self, theta: ArrayLike) -> np.ndarray:
        theta = _nonnegative("temperature", theta)
        return self.kappa.integrate(0.0, theta)

    def internal_energy(self, rho: ArrayLike, theta: ArrayLike) -> np.ndarray:
        return self.elastic_potential(rho) + self.thermal_Q(theta)

    def invert_Q(self, q: ArrayLike) -> np.ndarray:
        """
        The unique ``theta >= 0`` with ``Q(theta) = q``. Safeguarded Newton:
        iterates leaving the current bracket fall back to bisection.
        """
        q = _nonnegative("thermal energy", q)
        scalar = q.ndim == 0
        q = np.atleast_1d(q)
        tol = INVERT_TOL * np.maximum(1.0, q)

        hi = np.ones_like(q)
        for _ in range(200):
            short = self.thermal_Q(hi) < q
            if not np.any(short):
                break
            hi = np.where(short, 2.0 * hi, hi)
        lo = np.zeros_like(q)

        cv0 = float(self.c_v(0.0))
        theta = np.clip(q / cv0 if cv0 > 0 else hi / 2, lo, hi)
        for _ in range(200):
            f = self.thermal_Q(theta) - q
            done = np.abs(f) <= tol
            if np.all(done):
                break
            lo = np.where(f < 0, theta, lo)
            hi = np.where(f > 0, theta, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = theta - f / self.c_v(theta)
            inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
            theta = np.where(done, theta, np.where(inside, newton, (lo + hi) / 2))
        else:
            log.debug("invert_Q stopped at the iteration limit")
        return theta[0] if scalar else theta

    def renorm_pair(
        self, theta: ArrayLike, z: float
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        ``(Q_h, K_h, h)`` for the weight ``h(theta) = (1 + theta)^-z``, with
        ``Q_h = int_0^theta c_v h`` and ``K_h = int_0^theta kappa h``.
        """
        if not 0 < z < 1:
            raise BadExponent(f"renormalisation exponent must lie in (0, 1), got {z!r}")
        theta = _nonnegative("temperature", theta)

        def weighted(law: Law, upper: float) -> float:
            if upper == 0:
                return 0.0
            value, _ = quad(
                lambda s: float(law(s)) * (1.0 + s) ** -z,
                0.0,
                upper,
                epsrel=QUAD_RTOL,
                epsabs=0.0,
                limit=200,
            )
            return value

        Q_h = np.vectorize(lambda u: weighted(self.c_v, u), otypes=[float])(theta)
        K_h = np.vectorize(lambda u: weighted(self.kappa, u), otypes=[float])(theta)
        return Q_h, K_h, (1.0 + theta) ** -z


def h_condition(theta: ArrayLike, z: float) -> np.ndarray:
    """``h'' h - 2 h'^2`` for ``h = (1 + theta)^-z``; nonnegative for ``z <= 1``."""
    t = 1.0 + np.asarray(theta, dtype=float)
    h = t**-z
    dh = -z * t ** (-z - 1)
    ddh = z * (z + 1) * t ** (-z - 2)
    return ddh * h - 2 * dh * dh


def stress(grad_u: np.ndarray, mu_eff: ArrayLike, eta: float, dim: int) -> np.ndarray:
    """
    Newtonian stress ``mu (G + G^T - 2/dim tr(G) I) + eta tr(G) I`` for
    velocity gradients ``G`` of shape ``(dim, dim, ...)``.
    """
    G = np.asarray(grad_u, dtype=float)
    div = np.trace(G, axis1=0, axis2=1)
    eye = np.eye(dim).reshape((dim, dim) + (1,) * (G.ndim - 2))
    return mu_eff * (G + np.swapaxes(G, 0, 1) - (2.0 / dim) * div * eye) + eta * div * eye


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class HypothesisReport:
    checks: list[HypothesisCheck]

    #: Smallest ``c`` with ``p_theta(rho) <= c rho^(gamma/3)`` on the samples.
    tightest_c: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[HypothesisCheck]:
        return [c for c in self.checks if not c.passed]

    def __iter__(self) -> Iterator[HypothesisCheck]:
        return iter(self.checks)


def _below(lhs: np.ndarray, rhs: np.ndarray) -> bool:
    return bool(np.all(lhs <= rhs + CHECK_TOL * np.maximum(1.0, np.abs(rhs))))


def validate_hypotheses(cs: ConstitutiveSet) -> HypothesisReport:
    """
    Spot-checks the structural bounds on the pressure, heat conductivity and
    heat capacity on a logarithmic sample grid, plus the exponent
    constraints. Never raises: failures are listed in the report.
    """
    x = samples()
    g, a = cs.gamma, cs.alpha
    checks = [
        HypothesisCheck("gamma", g > 1.5, f"gamma = {g!r} must exceed 3/2"),
    ]

    pe0 = float(cs.p_e(0.0))
    dpe = cs.p_e.derivative(x)
    pe = cs.p_e(x)
    hp1 = abs(pe0) <= CHECK_TOL and _below(cs.a1 * x ** (g - 1) - cs.b, dpe)
    hp1 = hp1 and _below(pe, cs.a2 * x**g + cs.b)
    checks.append(
        HypothesisCheck(
            "pressure growth",
            hp1,
            f"p_e(0) = {pe0:.3g}, a1 rho^(g-1) - b <= p_e' and p_e <= a2 rho^g + b",
        )
    )

    pt0 = float(cs.p_theta(0.0))
    pt = cs.p_theta(x)
    ratio = pt / x ** (g / 3)
    tightest = float(np.max(ratio))
    monotone = bool(np.all(np.diff(pt) >= -CHECK_TOL * np.maximum(1.0, np.abs(pt[1:]))))
    hp2 = abs(pt0) <= CHECK_TOL and bool(np.all(pt >= 0)) and monotone
    hp2 = hp2 and tightest <= cs.c_theta * (1 + CHECK_TOL)
    checks.append(
        HypothesisCheck(
            "thermal pressure",
            hp2,
            f"p_theta(0) = {pt0:.3g}, monotone = {monotone}, "
            f"tightest c = {tightest:.6g} (allowed {cs.c_theta:.6g})",
        )
    )

    kappa = cs.kappa(x)
    band = x**a + 1
    checks.append(
        HypothesisCheck(
            "heat conductivity",
            _below(cs.k1 * band, kappa) and _below(kappa, cs.k2 * band),
            f"{cs.k1:g} (theta^a + 1) <= kappa <= {cs.k2:g} (theta^a + 1)",
        )
    )

    cv = cs.c_v(x)
    band = 1 + x ** (a / 2 - 1)
    checks.append(
        HypothesisCheck(
            "heat capacity",
            _below(cs.c_lower * band, cv) and _below(cv, cs.c_upper * band),
            f"{cs.c_lower:g} (1 + theta^(a/2-1)) <= c_v <= {cs.c_upper:g} (1 + theta^(a/2-1))",
        )
    )

    needed = max(4.0, 12 * (g - 1) / g)
    checks.append(
        HypothesisCheck(
            "conductivity exponent",
            a >= needed - CHECK_TOL,
            f"alpha = {a:g}, needs >= max(4, 12(gamma-1)/gamma) = {needed:.6g}",
        )
    )

    report = HypothesisReport(checks, tightest)
    for check in report.failures:
        log.debug(f"hypothesis '{check.name}' fails: {check.detail}")
    return report
