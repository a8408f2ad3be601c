"""1D Gauss / Gauss-Lobatto rules and centroid-fan quadrature on polygons."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.optimize import brentq

from .mesh import GeometryError, polygon_area, polygon_centroid


@dataclass(frozen=True)
class GaussLobattoRule:
    """k+1 point rule on [-1, 1] with both endpoints as nodes."""

    k: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def unit_nodes(self) -> np.ndarray:
        """Nodes mapped to [0, 1]."""
        return 0.5 * (self.nodes + 1.0)

    @property
    def unit_weights(self) -> np.ndarray:
        return 0.5 * self.weights


_GL_CLOSED_FORM = {
    1: (np.array([-1.0, 1.0]), np.array([1.0, 1.0])),
    2: (np.array([-1.0, 0.0, 1.0]), np.array([1.0, 4.0, 1.0]) / 3.0),
    3: (np.array([-1.0, -1.0 / math.sqrt(5.0), 1.0 / math.sqrt(5.0), 1.0]),
        np.array([1.0, 5.0, 5.0, 1.0]) / 6.0),
}


@lru_cache(maxsize=None)
def gauss_lobatto_rule(k: int) -> GaussLobattoRule:
    """Interior nodes are the roots of P_k', bracketed by the Gauss nodes of P_k."""
    if k < 1:
        raise ValueError("Gauss-Lobatto rule needs k >= 1")
    ck = np.zeros(k + 1)
    ck[k] = 1.0
    dck = legendre.legder(ck)
    gauss, _ = legendre.leggauss(k)
    interior = [
        brentq(lambda t: legendre.legval(t, dck), gauss[i], gauss[i + 1], xtol=1e-16, rtol=1e-15)
        for i in range(k - 1)
    ]
    nodes = np.array([-1.0, *interior, 1.0])
    # exact symmetry
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 2.0 / (k * (k + 1) * legendre.legval(nodes, ck) ** 2)
    rule = GaussLobattoRule(k, nodes, weights)
    rule.nodes.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule on [0, 1] (exact through degree 2n-1)."""
    x, w = legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed-square rule on the unit triangle (0,0),(1,0),(0,1); weights sum to 1/2."""
    n = max(1, math.ceil((degree + 2) / 2))
    x, w = gauss_rule(n)
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    xi = u.ravel()
    eta = (v * (1.0 - u)).ravel()
    wt = (wu * wv * (1.0 - u)).ravel()
    return np.column_stack([xi, eta]), wt


@dataclass(frozen=True)
class PolygonQuadrature:
    points: np.ndarray
    weights: np.ndarray
    degree: int


def polygon_quadrature(pts: np.ndarray, degree: int, center: np.ndarray | None = None) -> PolygonQuadrature:
    """Fan the polygon from its centroid and put a degree-exact rule on every triangle."""
    pts = np.asarray(pts, dtype=float)
    c = polygon_centroid(pts) if center is None else np.asarray(center, dtype=float)
    ref, rw = triangle_rule(degree)
    nxt = np.roll(pts, -1, axis=0)
    a = pts - c
    b = nxt - c
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    if np.any(det <= 1e-14 * abs(polygon_area(pts))):
        raise GeometryError("degenerate or inverted fan triangle")
    # (n_tri, n_ref, 2)
    qp = c + ref[None, :, :1] * a[:, None, :] + ref[None, :, 1:] * b[:, None, :]
    qw = det[:, None] * rw[None, :]
    return PolygonQuadrature(qp.reshape(-1, 2), qw.ravel(), degree)
