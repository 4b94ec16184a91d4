"""Third-order forward-mode jets.

A :class:`Jet3` carries a value together with its first three derivatives
with respect to a single scalar variable.  Components may be Python floats
or numpy arrays (elementwise jets), which lets the same expression tree be
evaluated on a whole grid at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np


class DomainError(ArithmeticError):
    """Raised when a jet operation leaves the domain of a function."""

    def __init__(self, what: str, value: Any):
        self.what = what
        self.value = value
        super().__init__(f"{what} out of domain at value {value!r}")


def _any(mask) -> bool:
    return bool(np.any(mask))


def _first_bad(x, mask):
    if np.ndim(x) == 0:
        return float(x)
    return float(np.asarray(x)[np.asarray(mask)].flat[0])


@dataclass(frozen=True)
class Jet3:
    """Value and derivatives (v0, v1, v2, v3) of a scalar function."""

    v0: Any
    v1: Any = 0.0
    v2: Any = 0.0
    v3: Any = 0.0

    @classmethod
    def variable(cls, u) -> "Jet3":
        one = np.ones_like(u, dtype=float) if np.ndim(u) else 1.0
        return cls(u, one, 0.0 * one, 0.0 * one)

    @classmethod
    def constant(cls, c) -> "Jet3":
        return cls(c, 0.0, 0.0, 0.0)

    def as_tuple(self) -> tuple:
        return (self.v0, self.v1, self.v2, self.v3)

    def derivative(self, order: int):
        return self.as_tuple()[order]

    # -- arithmetic -------------------------------------------------------

    def _lift(self, other) -> "Jet3":
        return other if isinstance(other, Jet3) else Jet3.constant(other)

    def __add__(self, other):
        o = self._lift(other)
        return Jet3(self.v0 + o.v0, self.v1 + o.v1, self.v2 + o.v2, self.v3 + o.v3)

    __radd__ = __add__

    def __neg__(self):
        return Jet3(-self.v0, -self.v1, -self.v2, -self.v3)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        a0, a1, a2, a3 = self.as_tuple()
        b0, b1, b2, b3 = o.as_tuple()
        return Jet3(
            a0 * b0,
            a1 * b0 + a0 * b1,
            a2 * b0 + 2.0 * a1 * b1 + a0 * b2,
            a3 * b0 + 3.0 * a2 * b1 + 3.0 * a1 * b2 + a0 * b3,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * reciprocal(self._lift(other))

    def __rtruediv__(self, other):
        return self._lift(other) * reciprocal(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def compose(self, h0, h1, h2, h3) -> "Jet3":
        """Chain rule: derivatives of h(self) given h and its derivatives at self.v0."""
        f1, f2, f3 = self.v1, self.v2, self.v3
        return Jet3(
            h0,
            h1 * f1,
            h2 * f1 * f1 + h1 * f2,
            h3 * f1 * f1 * f1 + 3.0 * h2 * f1 * f2 + h1 * f3,
        )


def reciprocal(x: Jet3, what: str = "division") -> Jet3:
    x0 = x.v0
    if _any(np.asarray(x0) == 0):
        raise DomainError(what, 0.0)
    inv = 1.0 / x0
    return x.compose(inv, -inv * inv, 2.0 * inv**3, -6.0 * inv**4)


def power(x: Jet3, exponent: float, what: str = "power") -> Jet3:
    """x**exponent for a constant exponent.

    Integer exponents use the falling-factorial rule (so 0**n is fine for
    n >= 0); anything else goes through exp(e*ln(x)).
    """
    e = float(exponent)
    if e.is_integer():
        n = int(e)
        x0 = x.v0
        if n < 0 and _any(np.asarray(x0) == 0):
            raise DomainError(what, 0.0)
        h = []
        coef = 1.0
        for k in range(4):
            if k > 0:
                coef *= n - k + 1
            if coef == 0.0:
                h.append(0.0 * x0)
            else:
                h.append(coef * x0 ** (n - k) if n - k != 0 else coef + 0.0 * x0)
        return x.compose(*h)
    return exp(log(x, what) * e)


def exp(x: Jet3) -> Jet3:
    e = np.exp(x.v0)
    return x.compose(e, e, e, e)


def log(x: Jet3, what: str = "ln") -> Jet3:
    x0 = x.v0
    bad = np.asarray(x0) <= 0
    if _any(bad):
        raise DomainError(what, _first_bad(x0, bad))
    inv = 1.0 / x0
    return x.compose(np.log(x0), inv, -inv * inv, 2.0 * inv**3)


def sqrt(x: Jet3, what: str = "sqrt") -> Jet3:
    x0 = x.v0
    bad = np.asarray(x0) <= 0
    if _any(bad):
        raise DomainError(what, _first_bad(x0, bad))
    s = np.sqrt(x0)
    return x.compose(s, 0.5 / s, -0.25 / (s * x0), 0.375 / (s * x0 * x0))


def sin(x: Jet3) -> Jet3:
    s, c = np.sin(x.v0), np.cos(x.v0)
    return x.compose(s, c, -s, -c)


def cos(x: Jet3) -> Jet3:
    s, c = np.sin(x.v0), np.cos(x.v0)
    return x.compose(c, -s, -c, s)


def scalar(j: Jet3) -> Jet3:
    """Convert 0-d numpy components to plain floats."""
    return Jet3(*(float(v) if np.ndim(v) == 0 else v for v in j.as_tuple()))


UNARY = {"exp": exp, "ln": log, "sqrt": sqrt, "sin": sin, "cos": cos}

__all__ = ["Jet3", "DomainError", "reciprocal", "power", "exp", "log", "sqrt", "sin", "cos", "UNARY"]
