from abc import ABCMeta, abstractmethod
from typing import Mapping

import numpy as np

from .util import BadConfig, smootherstep

#: Fraction of the support radius beyond which fields are tapered to zero.
TAPER_START = 0.8

FieldParams = Mapping[str, tuple[float, ...]]


class VelocityField(metaclass=ABCMeta):
    """
    Abstract base class for prescribed boundary velocities ``V(t, x)``.
    Built-in derived classes live in :mod:`nsf.fields`.

    Each field must define a :py:attr:`name` that is used to select the field
    in a case file, and a :func:`parameters` mapping that declares the keys it
    accepts in the ``[domain]`` section together with their defaults. The
    registry in :class:`nsf.setup.Setup` instantiates fields as
    ``cls(support_radius, dim, **params)``.

    Fields are evaluated on arrays of points with the component as leading
    axis, i.e. ``x.shape == (dim, ...)``, and return arrays of the same shape.
    Every field vanishes for ``|x| > R``: subclasses implement the raw motion
    in :func:`motion` and this class multiplies it with a C2 taper that is 1
    for ``|x| <= 0.8 R`` and 0 for ``|x| >= R``.

    :param support_radius: the radius ``R`` outside of which ``V`` vanishes
    :param dim: spatial dimension, 2 or 3
    """

    def __init__(self, support_radius: float, dim: int):
        if not support_radius > 0:
            raise BadConfig(f"support radius must be positive, got {support_radius}")
        self.support_radius = float(support_radius)
        self.dim = dim

    @property
    @abstractmethod
    def name(self) -> str:
        """The field's name, must be unique."""
        pass

    @classmethod
    def parameters(cls) -> dict[str, tuple[float, ...]]:
        """Accepted ``[domain]`` keys and their default values."""
        return {}

    @property
    def is_rest(self) -> bool:
        """``True`` if the field vanishes identically."""
        return False

    @abstractmethod
    def motion(self, t: float, x: np.ndarray) -> np.ndarray:
        """The untapered velocity at time ``t`` for points ``x``."""
        pass

    def motion_rate(self, t: float, x: np.ndarray) -> np.ndarray:
        """Time derivative of :func:`motion`; zero for steady fields."""
        return np.zeros_like(np.asarray(x, dtype=float))

    def taper(self, x: np.ndarray) -> np.ndarray:
        r = np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=0))
        r0 = TAPER_START * self.support_radius
        return 1.0 - smootherstep((r - r0) / (self.support_radius - r0))

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.motion(t, x) * self.taper(x)

    def time_derivative(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.motion_rate(t, x) * self.taper(x)

    def _vector(self, value: tuple[float, ...], what: str) -> np.ndarray:
        if len(value) != self.dim:
            raise BadConfig(f"{self.name}: {what} needs {self.dim} components, got {len(value)}")
        return np.asarray(value, dtype=float)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, self.__class__) and repr(other) == repr(self)

    def __hash__(self) -> int:
        return hash("field-" + repr(self))

    def __repr__(self) -> str:
        return f"<{self.name} field R={self.support_radius}>"

    def __str__(self) -> str:
        return self.name
