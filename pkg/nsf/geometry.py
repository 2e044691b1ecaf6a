import math
import logging

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from scipy import ndimage

from .field import VelocityField
from .grid import Grid
from .shape import ReferenceShape
from .util import BadConfig, DegenerateGradient, smootherstep

log = logging.getLogger("nsf.geometry")

#: Gradients at or below this norm have no defined direction.
GRADIENT_FLOOR = 1e-8

#: Half-width of the regularised surface delta, in cells.
DELTA_HALF_WIDTH = 1.5

#: Transition width of the viscosity mask, in cells.
VISCOSITY_BAND = 3.0


@dataclass(frozen=True)
class PenaltyParams:
    """
    Penalisation parameters. ``eps`` weights the boundary penalty, ``omega``
    and ``nu`` are the solid fractions of viscosity and conductivity, ``xi``
    is the mollification width of the conductivity mask and ``delta`` the
    weight of the artificial pressure ``delta * rho^beta``.
    """

    eps: float = 1e-2
    omega: float = 0.1
    nu: float = 1e-4
    xi: float = 0.1
    delta: float = 1e-2
    beta: float = 5.0

    def problems(self, gamma: float) -> list[tuple[str, str]]:
        found = []
        for key in ("eps", "omega", "nu", "xi", "delta", "beta"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value > 0):
                found.append((key, f"must be strictly positive, got {value!r}"))
        for key in ("omega", "nu"):
            if getattr(self, key) > 1:
                found.append((key, f"must lie in (0, 1], got {getattr(self, key)!r}"))
        if not self.beta > max(4.0, gamma):
            found.append(("beta", f"must exceed max(4, gamma) = {max(4.0, gamma)!r}"))
        return found

    def check(self, gamma: float) -> None:
        found = self.problems(gamma)
        if found:
            raise BadConfig("; ".join(f"{key}: {reason}" for key, reason in found))


def mask_chi_nu(phi: np.ndarray, nu: float) -> np.ndarray:
    return np.where(phi < 0, 1.0, nu)


def mask_chi_nu_xi(phi: np.ndarray, nu: float, xi: float) -> np.ndarray:
    """Smoothed conductivity mask: 1 for ``phi <= -xi``, ``nu`` for ``phi >= xi``."""
    return 1.0 - (1.0 - nu) * smootherstep((np.asarray(phi) / xi + 1.0) / 2.0)


def mask_viscosity(phi: np.ndarray, omega: float, mu: float, h: float) -> np.ndarray:
    """``mu`` in the closed fluid domain, ``omega * mu`` beyond three cells."""
    return mu * (1.0 - (1.0 - omega) * smootherstep(np.asarray(phi) / (VISCOSITY_BAND * h)))


def cosine_delta(phi: np.ndarray, grad_norm: np.ndarray, h: float) -> np.ndarray:
    """Cosine-bump surface density with support ``|phi| < 1.5 h``."""
    width = DELTA_HALF_WIDTH * h
    phi = np.asarray(phi, dtype=float)
    bump = (1.0 + np.cos(np.pi * phi / width)) / (2.0 * width)
    return np.where(np.abs(phi) < width, bump * grad_norm, 0.0)


@dataclass(frozen=True, eq=False)
class GeometrySnapshot:
    """
    Geometry of ``Omega_t`` sampled on the cell centres of a grid. Vector
    quantities carry the component as leading axis; ``grad_V[i, j]`` is
    ``d V_i / d x_j``. Normals are zero where the level set is flat.
    """

    t: float
    grid: Grid
    phi: np.ndarray
    grad_phi: np.ndarray
    normal: np.ndarray
    delta: np.ndarray
    V: np.ndarray
    dVdt: np.ndarray
    grad_V: np.ndarray
    div_V: np.ndarray

    def chi_nu(self, nu: float) -> np.ndarray:
        return mask_chi_nu(self.phi, nu)

    def chi_nu_xi(self, nu: float, xi: float) -> np.ndarray:
        return mask_chi_nu_xi(self.phi, nu, xi)

    def viscosity(self, omega: float, mu: float) -> np.ndarray:
        return mask_viscosity(self.phi, omega, mu, self.grid.h)


class MovingDomain:
    """
    The prescribed fluid domain ``Omega_t = X(t, Omega_0)``, transported by the
    flow map ``X`` of a velocity field ``V``. The box ``B`` is ``[-2R, 2R]^dim``
    with ``R`` the support radius of ``V``.

    Level sets are evaluated per query by integrating characteristics
    backward to ``t = 0`` and sampling the reference signed distance there, so
    no reinitialisation is ever needed. All queries take arrays of points of
    shape ``(dim, ...)``.

    :param field: the boundary velocity ``V``
    :param shape: the reference domain ``Omega_0``
    :param flow_step: maximal RK4 step of the backward characteristics
    """

    def __init__(self, field: VelocityField, shape: ReferenceShape, flow_step: float = 0.02):
        if field.dim != shape.dim:
            raise BadConfig(f"field is {field.dim}-D but shape is {shape.dim}-D")
        if not flow_step > 0:
            raise BadConfig(f"flow step must be positive, got {flow_step}")
        self.field = field
        self.shape = shape
        self.flow_step = float(flow_step)
        self.dim = field.dim
        self.support_radius = field.support_radius
        self.half_width = 2.0 * field.support_radius
        self.snapshot = lru_cache(maxsize=4)(self._build_snapshot)

    def __repr__(self) -> str:
        return f"<moving domain {self.shape!r} under {self.field!r}>"

    def grid(self, cells: int) -> Grid:
        """Uniform grid of the box ``B`` with ``cells`` cells per axis."""
        return Grid(self.dim, cells, self.half_width)

    def evaluate_V(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.field(t, x)

    def _rk4(self, t: float, X: np.ndarray, dt: float) -> np.ndarray:
        V = self.field
        k1 = V(t, X)
        k2 = V(t + dt / 2, X + dt / 2 * k1)
        k3 = V(t + dt / 2, X + dt / 2 * k2)
        k4 = V(t + dt, X + dt * k3)
        moved = X + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        outside = np.sqrt(np.sum(X * X, axis=0)) > self.support_radius
        return np.where(outside, X, moved)

    def advance_flow_map(self, X: np.ndarray, t: float, dt: float) -> np.ndarray:
        """
        One classical RK4 step of ``dX/dt = V(t, X)``. Positions outside the
        support of ``V`` are returned unchanged.
        """
        if not dt > 0:
            raise BadConfig(f"flow-map step must be positive, got {dt}")
        return self._rk4(t, np.asarray(X, dtype=float), dt)

    def level_set(self, t: float, x: np.ndarray) -> np.ndarray:
        """
        ``phi(t, x) = phi0(Y(0))`` where ``Y`` solves the characteristic ODE
        backward from ``Y(t) = x``; negative inside ``Omega_t``.
        """
        x = np.asarray(x, dtype=float)
        if t == 0 or self.field.is_rest:
            return self.shape.phi0(x)
        steps = max(1, math.ceil(t / self.flow_step - 1e-12))
        ds = t / steps
        Y = x
        for k in range(steps):
            Y = self._rk4(t - k * ds, Y, -ds)
        return self.shape.phi0(Y)

    def chi_nu(self, t: float, x: np.ndarray, nu: float) -> np.ndarray:
        return mask_chi_nu(self.level_set(t, x), nu)

    def chi_nu_xi(self, t: float, x: np.ndarray, nu: float, xi: float) -> np.ndarray:
        return mask_chi_nu_xi(self.level_set(t, x), nu, xi)

    def viscosity_mask(
        self, t: float, x: np.ndarray, omega: float, mu: float, h: float
    ) -> np.ndarray:
        return mask_viscosity(self.level_set(t, x), omega, mu, h)

    def _gradient(self, t: float, x: np.ndarray, h: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        offsets = np.eye(self.dim).reshape((self.dim, self.dim) + (1,) * (x.ndim - 1)) * h
        plus = self.level_set(t, x[:, None] + offsets)
        minus = self.level_set(t, x[:, None] - offsets)
        return (plus - minus) / (2.0 * h)

    def boundary_normal(self, t: float, x: np.ndarray, h: float) -> np.ndarray:
        """
        Unit outer normal ``grad phi / |grad phi|`` from centred differences of
        :func:`level_set` with spacing ``h``.
        """
        grad = self._gradient(t, x, h)
        norm = np.sqrt(np.sum(grad * grad, axis=0))
        if np.any(norm <= GRADIENT_FLOOR):
            raise DegenerateGradient(f"level-set gradient vanishes at t={t}")
        return grad / norm

    def surface_delta(self, t: float, x: np.ndarray, h: float) -> np.ndarray:
        grad = self._gradient(t, x, h)
        norm = np.sqrt(np.sum(grad * grad, axis=0))
        return cosine_delta(self.level_set(t, x), norm, h)

    def check_containment(self, end_time: float, samples: int = 256) -> None:
        """
        Verifies that ``V`` vanishes outside its support and that the boundary
        of ``Omega_t`` stays inside the box for ``t`` in ``[0, end_time]``.
        Raises :class:`BadConfig` otherwise.
        """
        R = self.support_radius
        rng = np.random.default_rng(0)
        probe = rng.normal(size=(self.dim, samples))
        probe /= np.sqrt(np.sum(probe * probe, axis=0))
        probe *= rng.uniform(1.0 + 1e-9, 2.0, size=samples) * R
        for t in np.linspace(0.0, end_time, 5):
            if np.any(self.field(float(t), probe) != 0):
                raise BadConfig(f"velocity field does not vanish outside radius {R}")

        if not self.shape.bounded:
            log.warning(f"{self.shape.name} is unbounded, skipping containment check")
            return

        X = self.shape.boundary_samples(samples)
        t = 0.0
        steps = max(1, math.ceil(end_time / self.flow_step)) if end_time > 0 else 0
        for _ in range(steps + 1):
            reach = float(np.max(np.abs(X)))
            if reach >= self.half_width:
                raise BadConfig(
                    f"domain boundary reaches {reach:.4g} at t={t:.4g}, "
                    f"outside the box of half-width {self.half_width}"
                )
            if t >= end_time:
                break
            dt = min(self.flow_step, end_time - t)
            X = self.advance_flow_map(X, t, dt)
            t += dt
        log.debug(f"containment verified up to t={end_time}")

    def chi_nu_xi_convolved(
        self, grid: Grid, t: float, nu: float, xi: float, time_samples: int = 5
    ) -> np.ndarray:
        """
        Reference conductivity mask: the sharp mask ``chi_nu`` convolved with a
        space-time bump mollifier of radius ``xi``. Only feasible on small
        grids; used to check :func:`chi_nu_xi`.
        """
        radius = int(math.ceil(xi / grid.h))
        offsets = np.arange(-radius, radius + 1) * grid.h
        r2 = sum(
            c**2 for c in np.meshgrid(*([offsets] * grid.dim), indexing="ij")
        ) / (xi * xi)
        kernel = np.where(r2 < 1, np.exp(-1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
        kernel /= kernel.sum()

        taus = np.linspace(-xi, xi, time_samples + 2)[1:-1]
        weights = np.exp(-1.0 / (1.0 - (taus / xi) ** 2))
        weights /= weights.sum()

        out = grid.zeros()
        for tau, weight in zip(taus, weights):
            sharp = self.chi_nu(max(t + tau, 0.0), grid.points, nu)
            out += weight * ndimage.convolve(sharp, kernel, mode="nearest")
        return out

    def velocity_fields(self, t: float, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        """``V`` and ``dV/dt`` on the cell centres of ``grid``."""
        return self.field(t, grid.points), self.field.time_derivative(t, grid.points)

    def _build_snapshot(self, t: float, grid: Grid) -> GeometrySnapshot:
        h = grid.h
        phi = self.level_set(t, grid.points)
        grad = np.stack(np.gradient(phi, h))
        norm = np.sqrt(np.sum(grad * grad, axis=0))
        safe = np.where(norm > GRADIENT_FLOOR, norm, 1.0)
        normal = np.where(norm > GRADIENT_FLOOR, grad / safe, 0.0)
        V, dVdt = self.velocity_fields(t, grid)
        if self.field.is_rest:
            grad_V = np.zeros((grid.dim, grid.dim) + grid.shape)
        else:
            grad_V = np.stack([np.stack(np.gradient(V[i], h)) for i in range(grid.dim)])
        div_V = np.trace(grad_V, axis1=0, axis2=1)
        return GeometrySnapshot(
            t=t,
            grid=grid,
            phi=phi,
            grad_phi=grad,
            normal=normal,
            delta=cosine_delta(phi, norm, h),
            V=V,
            dVdt=dVdt,
            grad_V=grad_V,
            div_V=div_V,
        )
