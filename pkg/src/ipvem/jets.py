"""Truncated bivariate Taylor arithmetic through total order 4.

A :class:`Jet4` stores Taylor coefficients ``c[i, j]`` (i + j <= 4) of a
scalar field around a point, so ``d^{i+j} u / dx^i dy^j = i! j! c[i, j]``.
Coefficients may be numpy arrays, which evaluates many points at once.

Write exact solutions with the module-level ``sin``/``cos``/``exp``/``sqrt``
and ``**``; they accept plain floats/arrays as well as jets.
"""
from __future__ import annotations

import math

import numpy as np

ORDER = 4
_TERMS = [(i, j) for i in range(ORDER + 1) for j in range(ORDER + 1 - i)]
_FACT = [math.factorial(n) for n in range(ORDER + 1)]


class JetDomainError(ArithmeticError):
    pass


class Jet4:
    __slots__ = ("c",)
    __array_ufunc__ = None

    def __init__(self, c: np.ndarray):
        self.c = c

    @classmethod
    def constant(cls, value, shape=()) -> Jet4:
        c = np.zeros((ORDER + 1, ORDER + 1) + tuple(shape))
        c[0, 0] = value
        return cls(c)

    @classmethod
    def variables(cls, x, y) -> tuple[Jet4, Jet4]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        cx = np.zeros((ORDER + 1, ORDER + 1) + shape)
        cy = np.zeros_like(cx)
        cx[0, 0] = x
        cx[1, 0] = 1.0
        cy[0, 0] = y
        cy[0, 1] = 1.0
        return cls(cx), cls(cy)

    # -- access
    @property
    def value(self):
        return self.c[0, 0]

    def d(self, i: int, j: int):
        """Partial derivative d^{i+j}/dx^i dy^j."""
        return _FACT[i] * _FACT[j] * self.c[i, j]

    @property
    def gradient(self):
        return self.d(1, 0), self.d(0, 1)

    @property
    def hessian(self):
        return self.d(2, 0), self.d(1, 1), self.d(0, 2)

    @property
    def bilaplacian(self):
        return self.d(4, 0) + 2.0 * self.d(2, 2) + self.d(0, 4)

    # -- arithmetic
    def _lift(self, other) -> Jet4:
        if isinstance(other, Jet4):
            return other
        c = np.zeros_like(self.c)
        c[0, 0] = other
        return Jet4(c)

    def __add__(self, other):
        if isinstance(other, Jet4):
            return Jet4(self.c + other.c)
        c = self.c.copy()
        c[0, 0] = c[0, 0] + other
        return Jet4(c)

    __radd__ = __add__

    def __neg__(self):
        return Jet4(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet4):
            return Jet4(self.c * other)
        a, b = self.c, other.c
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for i, j in _TERMS:
            for p in range(i + 1):
                for q in range(j + 1):
                    out[i, j] += a[p, q] * b[i - p, j - q]
        return Jet4(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet4):
            return Jet4(self.c / other)
        return self * other._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet4):
            return exp(p * log(self))
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = self._lift(1.0)
            for _ in range(int(p)):
                out = out * self
            return out
        a = self.value
        if np.any(a <= 0):
            raise JetDomainError(f"non-integer power {p} of a non-positive value")
        return self._compose([_power_coeff(p, n) * a ** (p - n) for n in range(ORDER + 1)])

    def __rpow__(self, base):
        return exp(self * math.log(base))

    def _reciprocal(self) -> Jet4:
        a = self.value
        if np.any(a == 0):
            raise JetDomainError("division by a jet with zero value")
        return self._compose([(-1) ** n * _FACT[n] / a ** (n + 1) for n in range(ORDER + 1)])

    def _compose(self, derivs) -> Jet4:
        """g(self) given g, g', ..., g'''' at the base value (truncated Taylor chain rule)."""
        delta = Jet4(self.c.copy())
        delta.c[0, 0] = 0.0
        out = Jet4(np.zeros_like(self.c))
        out.c[0, 0] = derivs[0]
        power = self._lift(1.0)
        for n in range(1, ORDER + 1):
            power = power * delta
            out = out + power * (derivs[n] / _FACT[n])
        return out


def _power_coeff(p: float, n: int) -> float:
    out = 1.0
    for m in range(n):
        out *= p - m
    return out


def sin(u):
    if isinstance(u, Jet4):
        s, c = np.sin(u.value), np.cos(u.value)
        return u._compose([s, c, -s, -c, s])
    return np.sin(u)


def cos(u):
    if isinstance(u, Jet4):
        s, c = np.sin(u.value), np.cos(u.value)
        return u._compose([c, -s, -c, s, c])
    return np.cos(u)


def exp(u):
    if isinstance(u, Jet4):
        e = np.exp(u.value)
        return u._compose([e] * (ORDER + 1))
    return np.exp(u)


def log(u):
    if isinstance(u, Jet4):
        a = u.value
        if np.any(a <= 0):
            raise JetDomainError("log of a non-positive value")
        return u._compose([np.log(a), 1 / a, -1 / a**2, 2 / a**3, -6 / a**4])
    return np.log(u)


def sqrt(u):
    return u**0.5 if isinstance(u, Jet4) else np.sqrt(u)


def jet_eval(fn, x, y) -> Jet4:
    """Evaluate ``fn(x, y)`` on jets seeded at the given point(s)."""
    jx, jy = Jet4.variables(x, y)
    out = fn(jx, jy)
    if not isinstance(out, Jet4):
        out = Jet4.constant(out, np.broadcast_shapes(np.shape(x), np.shape(y)))
    return out
