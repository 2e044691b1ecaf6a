import numpy as np

from ..field import VelocityField


class Rotation(VelocityField):
    """
    Rigid rotation about the origin with angular rate ``rate``; in 3-D the
    axis is ``z``. Inside ``0.8 R`` the velocity is exactly
    ``rate * (-y, x[, 0])``.
    """

    name = "rotation"

    def __init__(self, support_radius: float, dim: int, rate: tuple[float, ...] = (1.0,)):
        super().__init__(support_radius, dim)
        self.rate = float(rate[0])

    @classmethod
    def parameters(cls) -> dict[str, tuple[float, ...]]:
        return {"rate": (1.0,)}

    def motion(self, t: float, x: np.ndarray) -> np.ndarray:
        v = np.zeros_like(x)
        v[0] = -self.rate * x[1]
        v[1] = self.rate * x[0]
        return v

    def __repr__(self) -> str:
        return f"<rotation field R={self.support_radius} rate={self.rate}>"
