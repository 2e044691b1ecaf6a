import math

import numpy as np

from ..field import VelocityField


class PulsatingDisk(VelocityField):
    """
    Radial breathing motion ``V = a sin(2 pi f t) x``: the domain expands and
    contracts periodically about the origin.
    """

    name = "pulsating-disk"

    def __init__(
        self,
        support_radius: float,
        dim: int,
        amplitude: tuple[float, ...] = (0.2,),
        frequency: tuple[float, ...] = (1.0,),
    ):
        super().__init__(support_radius, dim)
        self.amplitude = float(amplitude[0])
        self.frequency = float(frequency[0])

    @classmethod
    def parameters(cls) -> dict[str, tuple[float, ...]]:
        return {"amplitude": (0.2,), "frequency": (1.0,)}

    def motion(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.amplitude * math.sin(2 * math.pi * self.frequency * t) * x

    def motion_rate(self, t: float, x: np.ndarray) -> np.ndarray:
        omega = 2 * math.pi * self.frequency
        return self.amplitude * omega * math.cos(omega * t) * x

    def __repr__(self) -> str:
        return f"<pulsating-disk field R={self.support_radius} a={self.amplitude} f={self.frequency}>"
