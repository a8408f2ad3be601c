"""Scaled monomials m_a(x) = ((x - x_K) / h_K)^a and their derivative tables.

Polynomials are coefficient vectors in this basis. Differentiation is a
square matrix acting on the coefficients (the top-degree rows drop out),
so derivative tables compose by matrix products.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def dim_poly(r: int) -> int:
    return 0 if r < 0 else (r + 1) * (r + 2) // 2


@lru_cache(maxsize=None)
def exponents(r: int) -> np.ndarray:
    """Exponent pairs ordered by total degree, x-power descending within a degree."""
    out = [(d - j, j) for d in range(r + 1) for j in range(d + 1)]
    arr = np.array(out, dtype=np.int64).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


def index_of(a: int, b: int) -> int:
    d = a + b
    return d * (d + 1) // 2 + b


@lru_cache(maxsize=None)
def _unit_derivative(r: int) -> tuple[np.ndarray, np.ndarray]:
    n = dim_poly(r)
    dx = np.zeros((n, n))
    dy = np.zeros((n, n))
    for col, (a, b) in enumerate(exponents(r)):
        if a > 0:
            dx[index_of(a - 1, b), col] = a
        if b > 0:
            dy[index_of(a, b - 1), col] = b
    dx.setflags(write=False)
    dy.setflags(write=False)
    return dx, dy


@dataclass(frozen=True)
class MonomialBasis:
    center: np.ndarray
    h: float
    degree: int
    dx: np.ndarray = field(init=False, repr=False)
    dy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        ux, uy = _unit_derivative(self.degree)
        object.__setattr__(self, "dx", ux / self.h)
        object.__setattr__(self, "dy", uy / self.h)

    @property
    def size(self) -> int:
        return dim_poly(self.degree)

    def values(self, pts: np.ndarray) -> np.ndarray:
        """(n_points, size) table of m_a at the points."""
        s = (np.atleast_2d(pts) - self.center) / self.h
        e = exponents(self.degree)
        r = self.degree
        px = s[:, 0:1] ** np.arange(r + 1)
        py = s[:, 1:2] ** np.arange(r + 1)
        return px[:, e[:, 0]] * py[:, e[:, 1]]

    def derivative(self, i: int, j: int) -> np.ndarray:
        """Coefficient map of d^{i+j}/dx^i dy^j."""
        out = np.eye(self.size)
        for _ in range(i):
            out = self.dx @ out
        for _ in range(j):
            out = self.dy @ out
        return out

    def directional(self, *dirs) -> np.ndarray:
        """Coefficient map of the mixed directional derivative along the given unit vectors."""
        out = np.eye(self.size)
        for d in dirs:
            out = (d[0] * self.dx + d[1] * self.dy) @ out
        return out

    @property
    def laplacian(self) -> np.ndarray:
        return self.dx @ self.dx + self.dy @ self.dy

    @property
    def bilaplacian(self) -> np.ndarray:
        lap = self.laplacian
        return lap @ lap

    def hessian_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.dx @ self.dx, self.dx @ self.dy, self.dy @ self.dy


def monomial_derivative_tables(basis: MonomialBasis, max_order: int = 4) -> dict[tuple[int, int], np.ndarray]:
    """All maps d^{i+j}/dx^i dy^j with i + j <= max_order, keyed by (i, j)."""
    return {(i, o - i): basis.derivative(i, o - i) for o in range(max_order + 1) for i in range(o + 1)}
