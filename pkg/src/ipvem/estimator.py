"""Residual a posteriori estimator with per-element components eta_1 ... eta_6.

The jump of u_h itself is deliberately not part of the estimator: the
components below are the only ones accumulated into eta_K.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from .localforms import l2_project, stabilization_residual
from .penalty import edge_quadrature, trace_operator
from .system import Solution, cell_samples

COMPONENTS = ("eta1", "eta2", "eta3", "eta4", "eta5", "eta6")


@dataclass(frozen=True)
class EstimatorConfig:
    """Which projector enters each term.

    ``variant="hess"`` uses the H2 projector in eta_2, eta_3 and eta_6;
    ``hess_eta1`` additionally moves the eta_1 gradient jumps onto it.
    """

    variant: str = "grad"
    hess_eta1: bool = False

    def __post_init__(self):
        if self.variant not in ("grad", "hess"):
            raise ValueError(f"unknown estimator variant {self.variant!r}")
        if self.hess_eta1 and self.variant != "hess":
            raise ValueError("hess_eta1 requires variant='hess'")


@dataclass(frozen=True)
class ElementEstimate:
    cell: int
    eta1: float
    eta2: float
    eta3: float
    eta4: float
    eta5: float
    eta6: float

    @property
    def components(self) -> np.ndarray:
        return np.array([self.eta1, self.eta2, self.eta3, self.eta4, self.eta5, self.eta6])

    @property
    def eta(self) -> float:
        return math.hypot(*self.components)  # scaled, so tiny components do not underflow


@dataclass(frozen=True)
class EstimatorResult:
    elements: tuple[ElementEstimate, ...]
    config: EstimatorConfig

    @property
    def eta_k(self) -> np.ndarray:
        return np.array([el.eta for el in self.elements])

    @property
    def eta(self) -> float:
        return aggregate(self.elements)[0]

    def component_totals(self) -> dict[str, float]:
        """Global (root-sum-square) value of every component."""
        C = np.array([el.components for el in self.elements]).reshape(-1, len(COMPONENTS))
        return dict(zip(COMPONENTS, np.sqrt((C**2).sum(axis=0)).tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell", *COMPONENTS, "eta_K"])
        for el in self.elements:
            w.writerow([el.cell, *(repr(float(v)) for v in el.components), repr(el.eta)])
        return buf.getvalue()


def _coeff_projectors(sol: Solution, cfg: EstimatorConfig):
    """Per-cell coefficient vectors used by (eta_1, eta_2/eta_3, eta_6)."""
    g, h = sol.grad_coeffs, sol.hess_coeffs
    hi = h if cfg.variant == "hess" else g
    return (h if cfg.hess_eta1 else g), hi, hi


def edge_jump_indicators(sol: Solution, e: int, c1: list, c23: list) -> tuple[float, float, float]:
    """Squared, weighted edge contributions (eta_1e^2, eta_2e^2, eta_3e^2).

    ``c1``/``c23`` hold the per-cell polynomial coefficients for the gradient
    and the higher-derivative jumps. Boundary edges only contribute to eta_1,
    measured against the prescribed normal derivative ``sol`` was solved with
    (passed through :func:`estimate`).
    """
    disc = sol.disc
    edges, verts = disc.edges, disc.mesh.vertices
    m, p = edges.minus[e], edges.plus[e]
    n, t = edges.normals[e], edges.tangents[e]
    xq, wq = edge_quadrature(edges, verts, e, disc.config.k)
    le = edges.lengths[e]
    I = np.eye(disc.ops[m].basis.size)

    def tr(cid, coeffs, kind):
        return trace_operator(disc.ops[cid], xq, n, t, kind, I) @ coeffs[cid]

    if p < 0:
        return float(wq @ tr(m, c1, "n") ** 2) / le, 0.0, 0.0
    j1 = tr(m, c1, "n") - tr(p, c1, "n")
    j2 = tr(m, c23, "nn") - tr(p, c23, "nn")
    j3 = tr(m, c23, "shear") - tr(p, c23, "shear")
    return float(wq @ j1**2) / le, le * float(wq @ j2**2), le**3 * float(wq @ j3**2)


def _boundary_eta1(sol: Solution, e: int, c1: list, g_n: Callable | None) -> float:
    disc = sol.disc
    edges = disc.edges
    m = edges.minus[e]
    n, t = edges.normals[e], edges.tangents[e]
    xq, wq = edge_quadrature(edges, disc.mesh.vertices, e, disc.config.k)
    ops = disc.ops[m]
    d = trace_operator(ops, xq, n, t, "n", np.eye(ops.basis.size)) @ c1[m]
    if g_n is not None:
        d = d - np.asarray(g_n(xq[:, 0], xq[:, 1], n), dtype=float)
    return float(wq @ d**2) / edges.lengths[e]


def element_indicators(sol: Solution, cid: int, f_values: np.ndarray | None,
                       c6: list) -> tuple[float, float, float]:
    """(eta_4, eta_5, eta_6) of one cell; ``f_values`` are f at the cell quadrature points."""
    ops = sol.disc.ops[cid]
    u = sol.local(cid)
    eta4 = float(np.linalg.norm(stabilization_residual(ops, ops.P_grad) @ u)) / ops.h
    if f_values is None:
        return eta4, 0.0, 0.0
    q = ops.quad
    V = ops.basis.values(q.points)
    fh = V @ l2_project(ops, f_values)
    bil = V @ (ops.basis.bilaplacian @ c6[cid])
    eta5 = ops.h**2 * float(np.sqrt(q.weights @ (f_values - fh) ** 2))
    eta6 = ops.h**2 * float(np.sqrt(q.weights @ (fh - bil) ** 2))
    return eta4, eta5, eta6


def aggregate(elements) -> tuple[float, list[int]]:
    """Global eta and cell ids sorted by descending eta_K (ties by id)."""
    ids = [el.cell for el in elements]
    vals = np.array([el.eta for el in elements])
    eta = math.hypot(*vals)
    order = sorted(range(len(ids)), key=lambda i: (-vals[i], ids[i]))
    return eta, [ids[i] for i in order]


def estimate(sol: Solution, f: Callable | None = None, g_n: Callable | None = None,
             config: EstimatorConfig | None = None) -> EstimatorResult:
    """Evaluate all element indicators for a computed solution.

    ``g_n(x, y, normal)`` is the clamped-boundary normal derivative; boundary
    normal-derivative jumps are measured against it (zero if omitted).
    """
    cfg = config or EstimatorConfig()
    disc = sol.disc
    nc, edges = disc.mesh.n_cells, disc.edges
    c1, c23, c6 = _coeff_projectors(sol, cfg)
    sq = np.zeros((nc, 3))
    for e in range(edges.n_edges):
        m, p = edges.minus[e], edges.plus[e]
        if p < 0:
            sq[m, 0] += _boundary_eta1(sol, e, c1, g_n)
            continue
        contrib = edge_jump_indicators(sol, e, c1, c23)
        sq[m] += contrib
        sq[p] += contrib
    fvals = cell_samples(disc, f) if f is not None else [None] * nc
    out = []
    for cid in range(nc):
        e4, e5, e6 = element_indicators(sol, cid, fvals[cid], c6)
        e1, e2, e3 = np.sqrt(sq[cid])
        out.append(ElementEstimate(cid, float(e1), float(e2), float(e3), e4, e5, e6))
    return EstimatorResult(tuple(out), cfg)


ESTIMATE_FIELDS = tuple(f.name for f in fields(ElementEstimate))
