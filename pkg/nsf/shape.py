from abc import ABCMeta, abstractmethod

import numpy as np

from .util import BadConfig


class ReferenceShape(metaclass=ABCMeta):
    """
    Abstract base class for the reference fluid domain ``Omega_0``. Built-in
    derived classes live in :mod:`nsf.shapes`.

    A shape provides the signed distance :func:`phi0` (negative inside) and,
    when bounded, a set of boundary samples used by the containment check of
    :class:`nsf.geometry.MovingDomain`. Shapes are instantiated from a case
    file as ``cls(dim, **params)``; :func:`parameters` declares the accepted
    ``[domain]`` keys and their defaults.

    :param dim: spatial dimension, 2 or 3
    """

    def __init__(self, dim: int):
        self.dim = dim

    @property
    @abstractmethod
    def name(self) -> str:
        """The shape's name, must be unique."""
        pass

    @classmethod
    def parameters(cls) -> dict[str, tuple[float, ...]]:
        return {}

    @property
    def bounded(self) -> bool:
        """``False`` for shapes extending to infinity (no containment check)."""
        return True

    @abstractmethod
    def phi0(self, x: np.ndarray) -> np.ndarray:
        """
        Signed distance to the boundary ``Gamma_0`` at points of shape
        ``(dim, ...)``.
        """
        pass

    def boundary_samples(self, count: int) -> np.ndarray:
        """
        Points on ``Gamma_0``, shape ``(dim, n)``. Only meaningful for bounded
        shapes.

        :param count: approximate number of samples
        """
        raise NotImplementedError(self.__class__.__name__)

    def _vector(self, value: tuple[float, ...], what: str) -> np.ndarray:
        if len(value) != self.dim:
            raise BadConfig(f"{self.name}: {what} needs {self.dim} components, got {len(value)}")
        return np.asarray(value, dtype=float)

    @staticmethod
    def _column(v: np.ndarray, x: np.ndarray) -> np.ndarray:
        return v.reshape((v.size,) + (1,) * (x.ndim - 1))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, self.__class__) and repr(other) == repr(self)

    def __hash__(self) -> int:
        return hash("shape-" + repr(self))

    def __repr__(self) -> str:
        return f"<{self.name} shape>"

    def __str__(self) -> str:
        return self.name
