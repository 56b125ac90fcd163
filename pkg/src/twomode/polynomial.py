"""Small dense polynomial type in one variable z (index = power of z)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly


@dataclass(frozen=True, eq=False)
class Polynomial:
    coefficients: np.ndarray

    def __init__(self, coefficients=()):
        c = np.atleast_1d(np.asarray(coefficients))
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1].copy() if nz.size else c[:0].copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def monomial(cls, m: int, coef=1.0) -> "Polynomial":
        c = np.zeros(m + 1)
        c[m] = coef
        return cls(c)

    @classmethod
    def from_roots(cls, roots) -> "Polynomial":
        roots = np.asarray(roots, dtype=complex)
        if roots.size == 0:
            return cls([1.0])
        return cls(npoly.polyfromroots(roots))

    @property
    def degree(self) -> float:
        """Degree; the zero polynomial has degree -inf."""
        return len(self.coefficients) - 1 if len(self.coefficients) else -np.inf

    def is_zero(self) -> bool:
        return len(self.coefficients) == 0

    def coef(self, k: int):
        return self.coefficients[k] if 0 <= k < len(self.coefficients) else 0.0

    def padded(self, n: int) -> np.ndarray:
        """Coefficients zero-padded (or checked) to exactly n entries."""
        c = self.coefficients
        if len(c) > n:
            raise ValueError(f"polynomial of degree {self.degree} does not fit in {n} slots")
        out = np.zeros(n, dtype=c.dtype if c.size else float)
        out[: len(c)] = c
        return out

    def __call__(self, z):
        if self.is_zero():
            return 0.0 * np.asarray(z)
        return npoly.polyval(z, self.coefficients)

    def deriv(self, k: int = 1) -> "Polynomial":
        if self.is_zero() or k > len(self.coefficients) - 1:
            return Polynomial()
        return Polynomial(npoly.polyder(self.coefficients, k))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        other = _lift(other)
        return Polynomial(npoly.polyadd(self._c(), other._c()))

    __radd__ = __add__

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        other = _lift(other)
        return Polynomial(npoly.polysub(self._c(), other._c()))

    def __neg__(self) -> "Polynomial":
        return Polynomial(-self.coefficients)

    def __mul__(self, other) -> "Polynomial":
        if np.isscalar(other):
            return Polynomial(self.coefficients * other)
        other = _lift(other)
        if self.is_zero() or other.is_zero():
            return Polynomial()
        return Polynomial(npoly.polymul(self.coefficients, other.coefficients))

    __rmul__ = __mul__

    def _c(self) -> np.ndarray:
        return self.coefficients if len(self.coefficients) else np.zeros(1)

    def allclose(self, other: "Polynomial", rtol=1e-12, atol=0.0) -> bool:
        n = max(len(self.coefficients), len(_lift(other).coefficients), 1)
        return np.allclose(self.padded(n), _lift(other).padded(n), rtol=rtol, atol=atol)

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coefficients)})"


def _lift(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    return Polynomial([p])
