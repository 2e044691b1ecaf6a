import numpy as np

from ..shape import ReferenceShape
from ..util import BadConfig


class HalfSpace(ReferenceShape):
    """
    The half-space ``{x : n.x < offset}`` with unit normal ``n``. A large
    offset puts the whole box inside the fluid, which is how the fluid-only
    regression cases are set up.
    """

    name = "half-space"

    def __init__(
        self,
        dim: int,
        normal: tuple[float, ...] = (),
        offset: tuple[float, ...] = (0.0,),
    ):
        super().__init__(dim)
        n = self._vector(normal or (1.0,) + (0.0,) * (dim - 1), "normal")
        length = float(np.linalg.norm(n))
        if length == 0:
            raise BadConfig("half-space normal must be nonzero")
        self.normal = n / length
        self.offset = float(offset[0])

    @classmethod
    def parameters(cls) -> dict[str, tuple[float, ...]]:
        return {"normal": (1.0, 0.0), "offset": (0.0,)}

    @property
    def bounded(self) -> bool:
        return False

    def phi0(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sum(self._column(self.normal, x) * x, axis=0) - self.offset

    def __repr__(self) -> str:
        return f"<half-space shape n={self.normal.tolist()} offset={self.offset}>"
