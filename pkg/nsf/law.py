from abc import ABCMeta, abstractmethod
from typing import Sequence

import numpy as np

ArrayLike = np.ndarray | float


class Law(metaclass=ABCMeta):
    """
    Abstract base class for scalar constitutive functions of one nonnegative
    argument, such as ``p_e(rho)`` or ``kappa(theta)``. Built-in derived
    classes live in :mod:`nsf.laws`.

    Each law must define a :func:`ident` method that returns a unique,
    parseable description of the instance. This is similar to the name of a
    velocity field, except that each instantiation can return a different ID
    depending on its parameters: a power law ``rho^2`` is identified as
    ``power-law 1:2``. Two laws with equal identifiers are considered equal,
    and :func:`nsf.config.emit_config` writes the identifier back into case
    files, so that ``Law.from_tokens(ident.split()[1:])`` reproduces the law.

    Laws are evaluated elementwise on arrays. The primitives that the
    constitutive set needs (elastic potential, thermal energy, conductivity
    primitive) are all of the form ``int_lo^hi f(z) z^k dz``, which is what
    :func:`integrate` computes; closed forms are used where they exist.
    """

    #: Law family, the first token of :func:`ident`.
    kind: str

    @classmethod
    @abstractmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Law":
        """
        Constructs a law from the parameter tokens following its family name
        in a case file. Raises :class:`ValueError` on malformed tokens.

        :param tokens: whitespace-separated parameters
        """
        pass

    @abstractmethod
    def ident(self) -> str:
        pass

    @abstractmethod
    def __call__(self, x: ArrayLike) -> np.ndarray:
        pass

    @abstractmethod
    def derivative(self, x: ArrayLike) -> np.ndarray:
        pass

    @abstractmethod
    def integrate(self, lo: ArrayLike, hi: ArrayLike, power: float = 0.0) -> np.ndarray:
        """
        Computes ``int_lo^hi f(z) z^power dz`` elementwise.

        :param lo: lower limits
        :param hi: upper limits, broadcast against ``lo``
        :param power: exponent ``k`` of the weight ``z^k``
        """
        pass

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Law) and other.ident() == self.ident()

    def __hash__(self) -> int:
        return hash("law-" + self.ident())

    def __repr__(self) -> str:
        return f"<'{self.ident()}' law>"

    def __str__(self) -> str:
        return self.ident()
