"""Edge penalty and consistency terms J1 + J2 + J3 and the clamped-boundary load.

Both neighbours of an edge are evaluated with the edge's own normal ``n_e``
(pointing from the minus to the plus cell), so jumps are ``w_minus - w_plus``.
On boundary edges the jump and the average are the one-sided trace.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import EdgeTable
from .projectors import ElementOperators
from .quadrature import gauss_rule

VARIANTS = ("grad", "hess")


@dataclass(frozen=True)
class EdgeCoupling:
    """Dense block on the concatenated DoFs of the minus and (if any) plus cell."""

    edge: int
    dofs: np.ndarray
    block: np.ndarray
    lam: float
    variant: str


def edge_quadrature(edges: EdgeTable, vertices: np.ndarray, e: int, k: int):
    """(k+2)-point Gauss points on edge e and weights scaled by |e|."""
    t, w = gauss_rule(k + 2)
    a = vertices[edges.verts[e, 0]]
    b = vertices[edges.verts[e, 1]]
    return a + t[:, None] * (b - a), w * edges.lengths[e]


def trace_operator(ops: ElementOperators, points: np.ndarray, normal, tangent, kind: str,
                   projector: np.ndarray | None = None) -> np.ndarray:
    """Matrix mapping local DoFs to a derivative of the projected polynomial at ``points``.

    kind: "n" (d/dn), "nn" (d2/dn2), "shear" (d(Lap)/dn + d3/dn dt2).
    """
    B = ops.basis
    if kind == "n":
        T = B.directional(normal)
    elif kind == "nn":
        T = B.directional(normal, normal)
    elif kind == "shear":
        T = B.directional(normal) @ B.laplacian + B.directional(normal, tangent, tangent)
    else:
        raise ValueError(f"unknown trace kind {kind!r}")
    P = ops.P_grad if projector is None else projector
    return B.values(points) @ T @ P


def edge_trace_eval(coeffs: np.ndarray, ops: ElementOperators, points: np.ndarray, normal, tangent,
                    kind: str) -> np.ndarray:
    """Pointwise derivative of a polynomial given by coefficients in the cell's basis."""
    return trace_operator(ops, points, normal, tangent, kind, projector=np.eye(ops.basis.size)) @ coeffs


def _projectors(ops: ElementOperators, variant: str):
    """(projector in J1 jumps, in second-derivative averages, in J2/J3 gradient jumps)."""
    if variant == "grad":
        return ops.P_grad, ops.P_grad, ops.P_grad
    if variant == "hess":
        return ops.P_hess, ops.P_hess, ops.P_grad
    raise ValueError(f"unknown variant {variant!r}")


def assemble_penalty_blocks(e: int, edges: EdgeTable, vertices: np.ndarray, ops_minus: ElementOperators,
                            dofs_minus: np.ndarray, ops_plus: ElementOperators | None = None,
                            dofs_plus: np.ndarray | None = None, lam: float = 1.0,
                            variant: str = "grad") -> EdgeCoupling:
    """J1 + J2 + J3 restricted to one edge, as a block on both cells' DoFs."""
    interior = edges.plus[e] >= 0
    if interior and ops_plus is None:
        raise ValueError(f"edge {e} is interior but the plus-side operators are missing")
    n, t = edges.normals[e], edges.tangents[e]
    xq, wq = edge_quadrature(edges, vertices, e, ops_minus.k)

    def traces(ops):
        Pj, Pa, Pg = _projectors(ops, variant)
        return (trace_operator(ops, xq, n, t, "n", Pj),
                trace_operator(ops, xq, n, t, "nn", Pa),
                trace_operator(ops, xq, n, t, "n", Pg))

    jm, am, gm = traces(ops_minus)
    if interior:
        jp, ap, gp = traces(ops_plus)
        jump1 = np.hstack([jm, -jp])
        avg2 = 0.5 * np.hstack([am, ap])
        jumpg = np.hstack([gm, -gp])
        dofs = np.concatenate([dofs_minus, dofs_plus])
    else:
        jump1, avg2, jumpg, dofs = jm, am, gm, np.asarray(dofs_minus)

    W = wq[:, None]
    J1 = (lam / edges.lengths[e]) * (jump1 * W).T @ jump1
    # rows: test function, columns: trial function
    J2 = -(jumpg * W).T @ avg2
    block = J1 + J2 + J2.T
    return EdgeCoupling(e, dofs, block, lam, variant)


def boundary_neumann_load(e: int, edges: EdgeTable, vertices: np.ndarray, ops: ElementOperators,
                          g_n: Callable, lam: float = 1.0, variant: str = "grad") -> np.ndarray:
    """Local load of int_e g_N (-d2 P v / dn2 + lam/|e| dP v/dn) on the only cell of a boundary edge.

    ``g_n(x, y, normal)`` gives the prescribed outward normal derivative.
    """
    n, t = edges.normals[e], edges.tangents[e]
    xq, wq = edge_quadrature(edges, vertices, e, ops.k)
    g = np.asarray(g_n(xq[:, 0], xq[:, 1], n), dtype=float) * np.ones(len(xq))
    Pj, Pa, _ = _projectors(ops, variant)
    d1 = trace_operator(ops, xq, n, t, "n", Pj)
    d2 = trace_operator(ops, xq, n, t, "nn", Pa)
    return (wq * g) @ (-d2 + (lam / edges.lengths[e]) * d1)
