"""Element DoF layout and the projector matrices of the IP virtual element.

Local DoFs of a cell with n vertices, in order:
  * n vertex values,
  * (k-1) values per edge at the interior Gauss-Lobatto nodes, edge j running
    from vertex j to vertex j+1,
  * dim P_{k-2} scaled moments |K|^-1 (m, v)_K.

Every projector is returned as a matrix taking the local DoF vector to
coefficients in the cell's scaled monomial basis of degree k.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .mesh import GeometryError, polygon_area, polygon_centroid, polygon_diameter
from .monomials import MonomialBasis, dim_poly
from .quadrature import PolygonQuadrature, gauss_lobatto_rule, gauss_rule, polygon_quadrature


@dataclass(frozen=True)
class DofLayout:
    k: int
    n_vertices: int

    @property
    def n_edge_interior(self) -> int:
        return self.k - 1

    @property
    def n_moments(self) -> int:
        return dim_poly(self.k - 2)

    @property
    def size(self) -> int:
        return self.n_vertices + (self.k - 1) * self.n_vertices + self.n_moments

    def edge_dofs(self, j: int) -> np.ndarray:
        """Local DoFs of edge j's interior nodes, ordered from vertex j to vertex j+1."""
        start = self.n_vertices + j * (self.k - 1)
        return np.arange(start, start + self.k - 1)

    def edge_node_dofs(self, j: int) -> np.ndarray:
        """DoFs sitting on all k+1 Gauss-Lobatto nodes of edge j."""
        n = self.n_vertices
        return np.concatenate([[j], self.edge_dofs(j), [(j + 1) % n]])

    @property
    def moment_dofs(self) -> np.ndarray:
        start = self.n_vertices * self.k
        return np.arange(start, start + self.n_moments)


@dataclass(frozen=True, eq=False)
class ElementOperators:
    k: int
    points: np.ndarray
    area: float
    centroid: np.ndarray
    h: float
    layout: DofLayout
    basis: MonomialBasis
    quad: PolygonQuadrature
    edge_tangents: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    D: np.ndarray
    P_grad: np.ndarray
    P_hess: np.ndarray
    P_l2: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    M: np.ndarray
    hess_rhs: np.ndarray
    cond: dict

    @property
    def ndof(self) -> int:
        return self.layout.size

    def dof_points(self) -> np.ndarray:
        """Coordinates of the point-value DoFs (vertices, then edge nodes)."""
        return _dof_points(self.points, self.k)


def _dof_points(pts: np.ndarray, k: int) -> np.ndarray:
    gl = gauss_lobatto_rule(k).unit_nodes[1:-1]
    nxt = np.roll(pts, -1, axis=0)
    ep = pts[:, None, :] + gl[None, :, None] * (nxt - pts)[:, None, :]
    return np.vstack([pts, ep.reshape(-1, 2)])


def dof_matrix(pts: np.ndarray, k: int, basis: MonomialBasis, quad: PolygonQuadrature) -> np.ndarray:
    """Row i, column a = chi_i(m_a)."""
    layout = DofLayout(k, len(pts))
    area = quad.weights.sum()
    D = np.zeros((layout.size, basis.size))
    pv = _dof_points(pts, k)
    D[: len(pv)] = basis.values(pv)
    V = basis.values(quad.points)
    nm = layout.n_moments
    if nm:
        D[layout.moment_dofs] = (V[:, :nm] * quad.weights[:, None]).T @ V / area
    return D


def _solve_saddle(G: np.ndarray, C: np.ndarray, rhs_top: np.ndarray, rhs_con: np.ndarray, what: str):
    n, m = G.shape[0], C.shape[0]
    S = np.zeros((n + m, n + m))
    S[:n, :n] = G
    S[:n, n:] = C.T
    S[n:, :n] = C
    rhs = np.vstack([rhs_top, rhs_con])
    try:
        sol = np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError as exc:
        raise GeometryError(f"singular constrained system for {what}") from exc
    return sol[:n], float(np.linalg.cond(S))


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Everything the projector builders share for one cell."""

    k: int
    points: np.ndarray
    area: float
    centroid: np.ndarray
    h: float
    layout: DofLayout
    basis: MonomialBasis
    quad: PolygonQuadrature
    tangents: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    M: np.ndarray
    G1: np.ndarray
    G2: np.ndarray

    @classmethod
    def from_points(cls, pts: np.ndarray, k: int, quad_degree: int | None = None) -> ElementGeometry:
        pts = np.asarray(pts, dtype=float)
        area = polygon_area(pts)
        if area <= 0:
            raise GeometryError("cell has non-positive area")
        xc = polygon_centroid(pts)
        h = polygon_diameter(pts)
        basis = MonomialBasis(xc, h, k)
        quad = polygon_quadrature(pts, 2 * k + 2 if quad_degree is None else quad_degree, center=xc)
        V = basis.values(quad.points)
        W = quad.weights[:, None]
        Dx, Dy = basis.dx, basis.dy
        Vx, Vy = V @ Dx, V @ Dy
        Hxx, Hxy, Hyy = V @ (Dx @ Dx), V @ (Dx @ Dy), V @ (Dy @ Dy)
        evec = np.roll(pts, -1, axis=0) - pts
        lengths = np.hypot(evec[:, 0], evec[:, 1])
        tangents = evec / lengths[:, None]
        return cls(
            k=k, points=pts, area=area, centroid=xc, h=h, layout=DofLayout(k, len(pts)),
            basis=basis, quad=quad, tangents=tangents,
            normals=np.column_stack([tangents[:, 1], -tangents[:, 0]]), lengths=lengths,
            M=(V * W).T @ V,
            G1=(Vx * W).T @ Vx + (Vy * W).T @ Vy,
            G2=(Hxx * W).T @ Hxx + 2.0 * (Hxy * W).T @ Hxy + (Hyy * W).T @ Hyy,
        )

    def edge_points(self, j: int, t: np.ndarray) -> np.ndarray:
        return self.points[j] + t[:, None] * (self.lengths[j] * self.tangents[j])


def build_grad_projector(geo: ElementGeometry) -> tuple[np.ndarray, float]:
    """Modified H1 projector.

    (grad P v, grad q) = -(v, Lap q) + sum_e GL_e(v d_n q), closed by matching
    the vertex average. Returns the matrix and the saddle-point condition number.
    """
    basis, layout, n = geo.basis, geo.layout, geo.layout.n_vertices
    nk, N = basis.size, layout.size
    gl = gauss_lobatto_rule(geo.k)
    nm = layout.n_moments
    B = np.zeros((nk, N))
    if nm:
        B[:, layout.moment_dofs] -= geo.area * basis.laplacian[:nm, :].T
    for j in range(n):
        dn = basis.values(geo.edge_points(j, gl.unit_nodes)) @ basis.directional(geo.normals[j])
        B[:, layout.edge_node_dofs(j)] += (geo.lengths[j] * gl.unit_weights[:, None] * dn).T
    c = basis.values(geo.points).mean(axis=0)[None, :]
    r = np.zeros((1, N))
    r[0, :n] = 1.0 / n
    return _solve_saddle(geo.G1, c, B, r, "grad projector")


def hess_rhs(geo: ElementGeometry, P_grad: np.ndarray) -> np.ndarray:
    """Matrix whose row a holds a^K(phi_i, m_a) for the local basis functions phi_i.

    a^K(v,q) = (Lap^2 q, v) + sum_e [ int q_nn d_n v - int (d_n Lap q + q_ntt) v ]
               + sum_e [q_nt v]_start^end,
    with d_n v replaced by d_n P_grad v (equal moments up to degree k-1).
    """
    basis, layout, n = geo.basis, geo.layout, geo.layout.n_vertices
    nk, N = basis.size, layout.size
    gl = gauss_lobatto_rule(geo.k)
    gx, gw = gauss_rule(geo.k + 2)
    nm = layout.n_moments
    lap = basis.laplacian
    C = np.zeros((nk, N))
    if nm:
        C[:, layout.moment_dofs] += geo.area * basis.bilaplacian[:nm, :].T
    for j in range(n):
        nj, tj, lj = geo.normals[j], geo.tangents[j], geo.lengths[j]
        Dn, Dt = basis.directional(nj), basis.directional(tj)
        Vg = basis.values(geo.edge_points(j, gx))
        C += lj * ((Vg @ Dn @ Dn) * gw[:, None]).T @ (Vg @ Dn @ P_grad)
        g = basis.values(geo.edge_points(j, gl.unit_nodes)) @ (Dn @ lap + Dn @ Dt @ Dt)
        C[:, layout.edge_node_dofs(j)] -= (lj * gl.unit_weights[:, None] * g).T
        qnt = basis.values(geo.edge_points(j, np.array([0.0, 1.0]))) @ (Dn @ Dt)
        C[:, j] -= qnt[0]
        C[:, (j + 1) % n] += qnt[1]
    return C


def build_hess_projector(geo: ElementGeometry, P_grad: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """H2 projector with boundary quasi-averages of the value and the gradient fixed.

    Returns (P_hess, right-hand side matrix, condition number).
    """
    basis, layout, n = geo.basis, geo.layout, geo.layout.n_vertices
    nk, N = basis.size, layout.size
    gl = gauss_lobatto_rule(geo.k)
    gx, gw = gauss_rule(geo.k + 2)
    C = hess_rhs(geo, P_grad)
    cons = np.zeros((3, nk))
    cons_rhs = np.zeros((3, N))
    for j in range(n):
        nj, tj, lj = geo.normals[j], geo.tangents[j], geo.lengths[j]
        Vg = basis.values(geo.edge_points(j, gx))
        cons[0] += lj * (gw @ Vg)
        cons[1] += lj * (gw @ (Vg @ basis.dx))
        cons[2] += lj * (gw @ (Vg @ basis.dy))
        # int_e v ds by Gauss-Lobatto on the DoF values
        cons_rhs[0, layout.edge_node_dofs(j)] += lj * gl.unit_weights
        # int_e grad v ds = t (v(end) - v(start)) + n int_e d_n P_grad v
        flux = lj * (gw @ (Vg @ basis.directional(nj) @ P_grad))
        for comp in (0, 1):
            cons_rhs[1 + comp] += nj[comp] * flux
            cons_rhs[1 + comp, (j + 1) % n] += tj[comp]
            cons_rhs[1 + comp, j] -= tj[comp]
    perim = geo.lengths.sum()
    P, cond = _solve_saddle(geo.G2, cons / perim, C, cons_rhs / perim, "hess projector")
    return P, C, cond


def build_l2_projector(geo: ElementGeometry, P_grad: np.ndarray) -> np.ndarray:
    """L2 projector: moments up to degree k-2 from the DoFs, the rest from P_grad v."""
    layout = geo.layout
    nm = layout.n_moments
    B = geo.M @ P_grad
    if nm:
        B[:nm] = 0.0
        B[np.arange(nm), layout.moment_dofs] = geo.area
    try:
        return np.linalg.solve(geo.M, B)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("singular mass matrix") from exc


def element_operators(pts: np.ndarray, k: int, quad_degree: int | None = None) -> ElementOperators:
    """Build D, P_grad, P_hess and P_l2 for one polygon.

    The matrices are assembled on a copy shifted to the first vertex and
    then translated back, which avoids cancellation on small, offset cells.
    """
    pts = np.asarray(pts, dtype=float)
    if np.any(pts[0] != 0.0):
        return translate_operators(element_operators(pts - pts[0], k, quad_degree), pts)
    geo = ElementGeometry.from_points(pts, k, quad_degree)
    D = dof_matrix(geo.points, k, geo.basis, geo.quad)
    P_grad, cond_grad = build_grad_projector(geo)
    P_hess, C, cond_hess = build_hess_projector(geo, P_grad)
    P_l2 = build_l2_projector(geo, P_grad)
    return ElementOperators(
        k=k, points=geo.points, area=geo.area, centroid=geo.centroid, h=geo.h, layout=geo.layout,
        basis=geo.basis, quad=geo.quad, edge_tangents=geo.tangents, edge_normals=geo.normals,
        edge_lengths=geo.lengths, D=D, P_grad=P_grad, P_hess=P_hess, P_l2=P_l2,
        G1=geo.G1, G2=geo.G2, M=geo.M, hess_rhs=C,
        cond={"grad": cond_grad, "hess": cond_hess, "mass": float(np.linalg.cond(geo.M))},
    )


def translate_operators(ops: ElementOperators, pts: np.ndarray) -> ElementOperators:
    """Operators of a translated copy of the cell; every matrix is translation invariant."""
    pts = np.asarray(pts, dtype=float)
    shift = pts[0] - ops.points[0]
    center = ops.centroid + shift
    return dataclasses.replace(
        ops, points=pts, centroid=center,
        basis=MonomialBasis(ops.basis.center + shift, ops.basis.h, ops.basis.degree),
        quad=PolygonQuadrature(ops.quad.points + shift, ops.quad.weights, ops.quad.degree),
    )


class OperatorCache:
    """Reuses element operators across cells that are translates of each other.

    Cells are keyed by their vertex offsets from the first vertex, so only
    bit-identical shapes (as on grids and their midpoint refinements) match.
    """

    def __init__(self, k: int, quad_degree: int | None = None):
        self.k = k
        self.quad_degree = quad_degree
        self._store: dict[bytes, ElementOperators] = {}
        self.hits = 0

    @staticmethod
    def key(pts: np.ndarray) -> bytes:
        return (pts - pts[0]).tobytes()

    def prefill(self, cells, executor_factory) -> None:
        """Build the operators of all distinct shapes concurrently."""
        todo = {}
        for pts in cells:
            pts = np.asarray(pts, dtype=float)
            k = self.key(pts)
            if k not in self._store and k not in todo:
                todo[k] = pts
        with executor_factory() as pool:
            built = pool.map(lambda p: element_operators(p, self.k, self.quad_degree), todo.values())
            self._store.update(zip(todo.keys(), built))

    def __call__(self, pts: np.ndarray) -> ElementOperators:
        pts = np.asarray(pts, dtype=float)
        key = self.key(pts)
        hit = self._store.get(key)
        if hit is None:
            self._store[key] = hit = element_operators(pts, self.k, self.quad_degree)
            return hit
        self.hits += 1
        return translate_operators(hit, pts)
