import numpy as np

from ..field import VelocityField


class Rest(VelocityField):
    """The zero field: the domain stays at its reference position."""

    name = "rest"

    @property
    def is_rest(self) -> bool:
        return True

    def motion(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x)
