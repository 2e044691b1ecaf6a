import math

import numpy as np

from ..shape import ReferenceShape
from ..util import BadConfig


class Disk(ReferenceShape):
    """
    Ball of radius ``radius`` around ``center``: a disk in 2-D and a sphere in
    3-D. ``phi0(x) = |x - center| - radius`` is an exact signed distance.
    """

    name = "disk"

    def __init__(
        self,
        dim: int,
        center: tuple[float, ...] = (),
        radius: tuple[float, ...] = (0.5,),
    ):
        super().__init__(dim)
        self.center = self._vector(center or (0.0,) * dim, "center")
        self.radius = float(radius[0])
        if not self.radius > 0:
            raise BadConfig(f"disk radius must be positive, got {self.radius}")

    @classmethod
    def parameters(cls) -> dict[str, tuple[float, ...]]:
        return {"center": (0.0, 0.0), "radius": (0.5,)}

    def phi0(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - self._column(self.center, x)
        return np.sqrt(np.sum(d * d, axis=0)) - self.radius

    def boundary_samples(self, count: int) -> np.ndarray:
        if self.dim == 2:
            a = np.linspace(0.0, 2 * math.pi, count, endpoint=False)
            dirs = np.stack([np.cos(a), np.sin(a)])
        else:
            # Fibonacci lattice on the unit sphere
            k = np.arange(count) + 0.5
            z = 1.0 - 2.0 * k / count
            a = math.pi * (1.0 + math.sqrt(5.0)) * k
            r = np.sqrt(1.0 - z * z)
            dirs = np.stack([r * np.cos(a), r * np.sin(a), z])
        return self.center[:, None] + self.radius * dirs

    def __repr__(self) -> str:
        return f"<disk shape c={self.center.tolist()} r={self.radius}>"
