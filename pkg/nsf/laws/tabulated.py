from typing import Sequence

import numpy as np

from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from ..law import ArrayLike, Law

#: Relative tolerance of adaptive quadrature.
QUAD_RTOL = 1e-10


class Tabulated(Law):
    """
    A law given by ``(x, y)`` samples, interpolated with a monotone cubic
    (PCHIP) so that monotone data stays monotone. Outside the table the law
    continues linearly with the end slopes. Written in case files as
    ``tabulated x1:y1 x2:y2 ...`` with strictly increasing ``x``.
    """

    kind = "tabulated"

    def __init__(self, points: Sequence[tuple[float, float]]):
        if len(points) < 2:
            raise ValueError("tabulated law needs at least two points")
        xs = np.array([p[0] for p in points], dtype=float)
        ys = np.array([p[1] for p in points], dtype=float)
        if np.any(np.diff(xs) <= 0):
            raise ValueError("tabulated law needs strictly increasing abscissae")
        self.points = tuple((float(x), float(y)) for x, y in points)
        self.xs = xs
        self.interp = PchipInterpolator(xs, ys, extrapolate=False)
        self.slope = self.interp.derivative()
        self.primitive = self.interp.antiderivative()
        self.left_slope = float(self.slope(xs[0]))
        self.right_slope = float(self.slope(xs[-1]))

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Tabulated":
        points = []
        for token in tokens:
            x, sep, y = token.partition(":")
            if not sep:
                raise ValueError(f"expected x:y, got '{token}'")
            points.append((float(x), float(y)))
        return cls(points)

    def ident(self) -> str:
        return " ".join([self.kind] + [f"{x!r}:{y!r}" for x, y in self.points])

    def __call__(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        x0, x1 = self.xs[0], self.xs[-1]
        inside = np.clip(x, x0, x1)
        out = self.interp(inside)
        out = np.where(x < x0, self.points[0][1] + self.left_slope * (x - x0), out)
        out = np.where(x > x1, self.points[-1][1] + self.right_slope * (x - x1), out)
        return out

    def derivative(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.slope(np.clip(x, self.xs[0], self.xs[-1]))
        out = np.where(x < self.xs[0], self.left_slope, out)
        return np.where(x > self.xs[-1], self.right_slope, out)

    def integrate(self, lo: ArrayLike, hi: ArrayLike, power: float = 0.0) -> np.ndarray:
        lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        x0, x1 = self.xs[0], self.xs[-1]
        if power == 0 and np.all((lo >= x0) & (lo <= x1) & (hi >= x0) & (hi <= x1)):
            return self.primitive(hi) - self.primitive(lo)

        def one(a: float, b: float) -> float:
            if a == b:
                return 0.0
            sign, a, b = (1.0, a, b) if a < b else (-1.0, b, a)
            breaks = [p for p in self.xs if a < p < b]
            value, _ = quad(
                lambda z: float(self(z)) * z**power,
                a,
                b,
                epsrel=QUAD_RTOL,
                epsabs=0.0,
                points=breaks or None,
                limit=200,
            )
            return sign * value

        return np.vectorize(one, otypes=[float])(lo, hi)
