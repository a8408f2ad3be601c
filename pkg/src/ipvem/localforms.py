"""Element stiffness (consistency + stabilization) and element load."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .projectors import ElementOperators


def stabilization_residual(ops: ElementOperators, projector: np.ndarray | None = None) -> np.ndarray:
    """I - D P: the DoFs of v - P v as a map on the DoF vector of v."""
    P = ops.P_hess if projector is None else projector
    return np.eye(ops.ndof) - ops.D @ P


def local_stiffness(ops: ElementOperators) -> np.ndarray:
    """a_h^K = a^K(P_hess v, P_hess w) + h^-2 S^K(v - P_hess v, w - P_hess w)."""
    R = stabilization_residual(ops)
    A = ops.P_hess.T @ ops.G2 @ ops.P_hess + (R.T @ R) / ops.h**2
    return 0.5 * (A + A.T)


def local_load(ops: ElementOperators, f: Callable | np.ndarray) -> np.ndarray:
    """(f, P_l2 phi_i)_K for every local basis function.

    ``f`` is either a callable f(x, y) or its values at the cell quadrature points.
    """
    q = ops.quad
    fv = f(q.points[:, 0], q.points[:, 1]) if callable(f) else f
    fv = np.asarray(fv, dtype=float) * np.ones(len(q.weights))
    moments = ops.basis.values(q.points).T @ (q.weights * fv)
    return ops.P_l2.T @ moments


def l2_project(ops: ElementOperators, values_at_quad: np.ndarray) -> np.ndarray:
    """Coefficients of the L2 projection onto P_k of data sampled at the cell quadrature points."""
    V = ops.basis.values(ops.quad.points)
    return np.linalg.solve(ops.M, V.T @ (ops.quad.weights * values_at_quad))
