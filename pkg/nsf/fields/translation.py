import numpy as np

from ..field import VelocityField


class Translation(VelocityField):
    """
    Uniform translation with constant velocity ``c`` inside the support.

    :param velocity: the translation velocity ``c``, one entry per axis
    """

    name = "translation"

    def __init__(self, support_radius: float, dim: int, velocity: tuple[float, ...] = ()):
        super().__init__(support_radius, dim)
        self.velocity = self._vector(velocity or (1.0,) + (0.0,) * (dim - 1), "velocity")

    @classmethod
    def parameters(cls) -> dict[str, tuple[float, ...]]:
        return {"velocity": (1.0, 0.0)}

    def motion(self, t: float, x: np.ndarray) -> np.ndarray:
        shape = (self.dim,) + (1,) * (x.ndim - 1)
        return np.broadcast_to(self.velocity.reshape(shape), x.shape).copy()

    def __repr__(self) -> str:
        return f"<translation field R={self.support_radius} c={self.velocity.tolist()}>"
