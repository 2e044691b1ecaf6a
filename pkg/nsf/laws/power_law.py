from typing import Sequence

import numpy as np

from ..law import ArrayLike, Law


class PowerLaw(Law):
    """
    A finite sum of monomials ``sum_i c_i x^e_i`` with nonnegative exponents.
    Written in case files as ``power-law c1:e1 c2:e2 ...``; an empty term list
    is the zero law.

    :param terms: ``(coefficient, exponent)`` pairs
    """

    kind = "power-law"

    def __init__(self, terms: Sequence[tuple[float, float]] = ()):
        for c, e in terms:
            if e < 0:
                raise ValueError(f"power-law exponent must be nonnegative, got {e}")
        self.terms = tuple((float(c), float(e)) for c, e in terms)

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "PowerLaw":
        terms = []
        for token in tokens:
            c, sep, e = token.partition(":")
            if not sep:
                raise ValueError(f"expected coefficient:exponent, got '{token}'")
            terms.append((float(c), float(e)))
        return cls(terms)

    def ident(self) -> str:
        return " ".join([self.kind] + [f"{c!r}:{e!r}" for c, e in self.terms])

    def __call__(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, e in self.terms:
            out = out + c * x**e
        return out

    def derivative(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            for c, e in self.terms:
                if e != 0:
                    out = out + c * e * x ** (e - 1)
        return out

    def integrate(self, lo: ArrayLike, hi: ArrayLike, power: float = 0.0) -> np.ndarray:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        out = np.zeros(np.broadcast(lo, hi).shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            for c, e in self.terms:
                p = e + power + 1
                if p == 0:
                    out = out + c * (np.log(hi) - np.log(lo))
                else:
                    out = out + c * (hi**p - lo**p) / p
        return out

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c, _ in self.terms)
