from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .util import BadConfig

#: Minimum number of cells per axis.
MIN_CELLS = 16


@dataclass(frozen=True)
class Grid:
    """
    Uniform cell-centred discretisation of the box ``[-L, L]^dim``. Arrays of
    scalar fields have shape :attr:`shape`; vector fields carry the component
    as leading axis, ``(dim, *shape)``.
    """

    dim: int
    cells: int
    half_width: float

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise BadConfig(f"grid dimension must be 2 or 3, got {self.dim}")
        if self.cells < MIN_CELLS:
            raise BadConfig(f"grid needs at least {MIN_CELLS} cells per axis, got {self.cells}")
        if not self.half_width > 0:
            raise BadConfig(f"box half-width must be positive, got {self.half_width}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.cells

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def axis(self) -> np.ndarray:
        """Cell-centre coordinates along one axis."""
        return -self.half_width + self.h * (np.arange(self.cells) + 0.5)

    @cached_property
    def points(self) -> np.ndarray:
        """Cell centres, shape ``(dim, *shape)``."""
        return np.stack(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def vector_zeros(self) -> np.ndarray:
        return np.zeros((self.dim, *self.shape))
