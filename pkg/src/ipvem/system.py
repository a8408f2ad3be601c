"""Global DoF numbering, sparse assembly, Dirichlet elimination, solve and ErrH2."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .localforms import local_load, local_stiffness
from .mesh import EdgeTable, PolygonalMesh
from .monomials import dim_poly
from .penalty import assemble_penalty_blocks, boundary_neumann_load
from .projectors import ElementOperators, OperatorCache, element_operators
from .quadrature import gauss_lobatto_rule

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GlobalDofs:
    """One DoF per used vertex, k-1 per edge (in the edge's own direction), dim P_{k-2} per cell."""

    k: int
    n_dofs: int
    vertex_dof: np.ndarray
    edge_base: np.ndarray
    cell_base: np.ndarray
    cell_dofs: tuple[np.ndarray, ...]
    boundary_dofs: np.ndarray
    boundary_points: np.ndarray

    def scatter(self, cid: int) -> np.ndarray:
        return self.cell_dofs[cid]


def number_dofs(mesh: PolygonalMesh, edges: EdgeTable, k: int) -> GlobalDofs:
    used = np.zeros(mesh.n_vertices, dtype=bool)
    for c in mesh.cells:
        used[list(c)] = True
    vertex_dof = np.full(mesh.n_vertices, -1, dtype=np.int64)
    vertex_dof[used] = np.arange(used.sum())
    nv = int(used.sum())
    ne = edges.n_edges
    edge_base = nv + (k - 1) * np.arange(ne, dtype=np.int64)
    nm = dim_poly(k - 2)
    cell_base = nv + (k - 1) * ne + nm * np.arange(mesh.n_cells, dtype=np.int64)
    n_dofs = nv + (k - 1) * ne + nm * mesh.n_cells

    cell_dofs = []
    for cid, cyc in enumerate(mesh.cells):
        parts = [vertex_dof[list(cyc)]]
        for eid, sign in zip(edges.cell_edges[cid], edges.cell_edge_signs[cid]):
            ed = edge_base[eid] + np.arange(k - 1)
            parts.append(ed if sign > 0 else ed[::-1])
        parts.append(cell_base[cid] + np.arange(nm))
        cell_dofs.append(np.concatenate(parts).astype(np.int64))

    bnd = np.flatnonzero(edges.boundary)
    gl = gauss_lobatto_rule(k).unit_nodes[1:-1]
    bverts = np.unique(edges.verts[bnd].ravel())
    bdofs = [vertex_dof[bverts]]
    bpts = [mesh.vertices[bverts]]
    for e in bnd:
        a, b = mesh.vertices[edges.verts[e, 0]], mesh.vertices[edges.verts[e, 1]]
        bdofs.append(edge_base[e] + np.arange(k - 1))
        bpts.append(a + gl[:, None] * (b - a))
    return GlobalDofs(
        k=k, n_dofs=int(n_dofs), vertex_dof=vertex_dof, edge_base=edge_base, cell_base=cell_base,
        cell_dofs=tuple(cell_dofs), boundary_dofs=np.concatenate(bdofs).astype(np.int64),
        boundary_points=np.vstack(bpts),
    )


@dataclass
class SchemeConfig:
    """Scheme parameters; ``lam`` may be a scalar or one value per edge."""

    k: int = 2
    lam: float = 10.0
    variant: str = "grad"
    quad_degree: int | None = None
    parallel: bool = False
    solver: str = "direct"
    cache: bool = True


@dataclass(eq=False)
class Discretization:
    """Mesh, topology, DoF numbering and the per-cell operators for one scheme."""

    mesh: PolygonalMesh
    config: SchemeConfig
    edges: EdgeTable = field(init=False)
    dofs: GlobalDofs = field(init=False)
    ops: list[ElementOperators] = field(init=False)

    def __post_init__(self):
        self.edges = self.mesh.edges
        self.dofs = number_dofs(self.mesh, self.edges, self.config.k)
        cfg = self.config
        pts = [self.mesh.cell_points(c) for c in range(self.mesh.n_cells)]
        if cfg.cache:
            cache = OperatorCache(cfg.k, cfg.quad_degree)
            if cfg.parallel:
                cache.prefill(pts, ThreadPoolExecutor)
            self.ops = [cache(p) for p in pts]
        elif cfg.parallel:
            with ThreadPoolExecutor() as pool:
                self.ops = list(pool.map(lambda p: element_operators(p, cfg.k, cfg.quad_degree), pts))
        else:
            self.ops = [element_operators(p, cfg.k, cfg.quad_degree) for p in pts]

    @property
    def n_dofs(self) -> int:
        return self.dofs.n_dofs

    def lam(self, e: int) -> float:
        lam = self.config.lam
        return float(lam[e]) if np.ndim(lam) else float(lam)


@dataclass(eq=False)
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    free: np.ndarray = field(init=False)

    def __post_init__(self):
        mask = np.ones(self.matrix.shape[0], dtype=bool)
        mask[self.dirichlet_dofs] = False
        self.free = np.flatnonzero(mask)


@dataclass(eq=False)
class Solution:
    disc: Discretization
    values: np.ndarray
    grad_coeffs: list[np.ndarray]
    hess_coeffs: list[np.ndarray]
    residual: float = 0.0
    spd: bool = True

    def local(self, cid: int) -> np.ndarray:
        return self.values[self.disc.dofs.cell_dofs[cid]]


def cell_samples(disc: Discretization, fn: Callable) -> list:
    """Evaluate ``fn(x, y)`` at every cell's quadrature points in one batched call.

    ``fn`` may return an array or a tuple of arrays; the result is split per cell.
    """
    pts = [ops.quad.points for ops in disc.ops]
    sizes = np.cumsum([len(p) for p in pts])[:-1]
    allp = np.vstack(pts)
    out = fn(allp[:, 0], allp[:, 1])
    if isinstance(out, tuple):
        parts = [np.split(np.asarray(a, dtype=float) * np.ones(len(allp)), sizes) for a in out]
        return [tuple(p[i] for p in parts) for i in range(len(pts))]
    return np.split(np.asarray(out, dtype=float) * np.ones(len(allp)), sizes)


def _coo(blocks) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows, cols, vals = [], [], []
    for dofs, block in blocks:
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        vals.append(block.ravel())
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def assemble(disc: Discretization, f: Callable | None = None, g_n: Callable | None = None,
             include_penalty: bool = True) -> tuple[sp.csr_matrix, np.ndarray]:
    """Scatter-add element stiffness, edge couplings and loads."""
    mesh, edges, dofs, cfg = disc.mesh, disc.edges, disc.dofs, disc.config
    blocks = [(dofs.cell_dofs[c], local_stiffness(disc.ops[c])) for c in range(mesh.n_cells)]
    if include_penalty:
        for e in range(edges.n_edges):
            m, p = edges.minus[e], edges.plus[e]
            cpl = assemble_penalty_blocks(
                e, edges, mesh.vertices, disc.ops[m], dofs.cell_dofs[m],
                disc.ops[p] if p >= 0 else None, dofs.cell_dofs[p] if p >= 0 else None,
                lam=disc.lam(e), variant=cfg.variant)
            blocks.append((cpl.dofs, cpl.block))
    r, c, v = _coo(blocks)
    if r.size and (r.max() >= dofs.n_dofs or r.min() < 0):
        raise IndexError("scatter index out of range")
    A = sp.coo_matrix((v, (r, c)), shape=(dofs.n_dofs, dofs.n_dofs)).tocsr()
    A.sum_duplicates()

    F = np.zeros(dofs.n_dofs)
    if f is not None:
        fvals = cell_samples(disc, f) if callable(f) else f
        for cid in range(mesh.n_cells):
            np.add.at(F, dofs.cell_dofs[cid], local_load(disc.ops[cid], fvals[cid]))
    if g_n is not None:
        for e in np.flatnonzero(edges.boundary):
            m = edges.minus[e]
            np.add.at(F, dofs.cell_dofs[m],
                      boundary_neumann_load(e, edges, mesh.vertices, disc.ops[m], g_n, disc.lam(e), cfg.variant))
    return A, F


def impose_dirichlet(disc: Discretization, A: sp.csr_matrix, F: np.ndarray,
                     g_d: Callable | None = None) -> GlobalSystem:
    """Prescribe boundary vertex and Gauss-Lobatto values by interpolating g_D."""
    bd = disc.dofs.boundary_dofs
    if g_d is None:
        vals = np.zeros(len(bd))
    else:
        pts = disc.dofs.boundary_points
        vals = np.asarray(g_d(pts[:, 0], pts[:, 1]), dtype=float) * np.ones(len(bd))
    return GlobalSystem(A, F, bd, vals)


def reduced(system: GlobalSystem) -> tuple[sp.csr_matrix, np.ndarray]:
    A, fr = system.matrix, system.free
    Aff = A[fr][:, fr]
    Afb = A[fr][:, system.dirichlet_dofs]
    return Aff.tocsc(), system.rhs[fr] - Afb @ system.dirichlet_values


def solve_linear(Aff, b: np.ndarray, method: str = "direct", tol: float = 1e-12,
                 require_spd: bool = False) -> tuple[np.ndarray, bool]:
    """Solve the reduced system; returns (x, spd) where spd reports the pivot check.

    The direct path factorizes with diagonal pivoting, which doubles as the
    positive-definiteness test. A negative pivot is reported and, unless
    ``require_spd``, the system is re-solved with partial pivoting.
    """
    if Aff.shape[0] == 0:
        return np.zeros(0), True
    A = sp.csc_matrix(Aff)
    if method == "direct":
        d = A.diagonal()
        # symmetric Jacobi scaling keeps the h^-4 spread of the entries out of the pivots
        s = 1.0 / np.sqrt(np.abs(d)) if np.all(d != 0) else np.ones_like(d)
        S = sp.diags(s)
        As = sp.csc_matrix(S @ A @ S)
        try:
            lu = spla.splu(As, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
            diag = lu.U.diagonal()
        except RuntimeError:
            diag = np.array([-np.inf])
            lu = None
        spd = bool(np.all(diag > 0) and np.all(d > 0))
        if not spd:
            i = int(np.argmin(diag))
            msg = f"reduced matrix is not positive definite: smallest pivot {diag[i]:.3e} (position {i})"
            if require_spd:
                raise SolverError(msg)
            log.warning("%s; solving with partial pivoting", msg)
            try:
                lu = spla.splu(As)
            except RuntimeError as exc:
                raise SolverError(f"sparse factorization failed: {exc}") from exc
        x = s * lu.solve(s * b)
        for _ in range(2):
            x = x + s * lu.solve(s * (b - A @ x))
        return x, spd
    if method == "cg":
        d = A.diagonal()
        if np.any(d <= 0):
            raise SolverError("non-positive diagonal entry; matrix is not SPD")
        x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=20 * A.shape[0], M=sp.diags(1.0 / d))
        if info != 0:
            raise SolverError(f"conjugate gradients did not converge (info={info})")
        return x, True
    raise ValueError(f"unknown solver {method!r}")


def backward_error(A, x: np.ndarray, b: np.ndarray) -> float:
    """Normwise relative residual ||Ax - b|| / (||A|| ||x|| + ||b||) in the max norm."""
    if len(b) == 0:
        return 0.0
    r = np.abs(A @ x - b).max()
    scale = spla.norm(A, np.inf) * np.abs(x).max() + np.abs(b).max()
    return float(r / scale) if scale > 0 else float(r)


def solve(disc: Discretization, system: GlobalSystem) -> Solution:
    Aff, b = reduced(system)
    x, spd = solve_linear(Aff, b, disc.config.solver)
    u = np.zeros(system.matrix.shape[0])
    u[system.dirichlet_dofs] = system.dirichlet_values
    u[system.free] = x
    res = backward_error(Aff, x, b)
    if res > 1e-10:
        log.warning("normwise backward error %.2e exceeds 1e-10", res)
    sol = make_solution(disc, u, res)
    sol.spd = spd
    return sol


def make_solution(disc: Discretization, u: np.ndarray, residual: float = 0.0) -> Solution:
    grad, hess = [], []
    for cid, ops in enumerate(disc.ops):
        ul = u[disc.dofs.cell_dofs[cid]]
        grad.append(ops.P_grad @ ul)
        hess.append(ops.P_hess @ ul)
    return Solution(disc, u, grad, hess, float(residual))


def interpolate(disc: Discretization, fn: Callable) -> np.ndarray:
    """DoF vector I_h u: point values at vertices/GL nodes and cell moments by quadrature."""
    u = np.zeros(disc.n_dofs)
    for cid, ops in enumerate(disc.ops):
        gd = disc.dofs.cell_dofs[cid]
        pts = ops.dof_points()
        u[gd[: len(pts)]] = fn(pts[:, 0], pts[:, 1])
        nm = ops.layout.n_moments
        if nm:
            q = ops.quad
            vals = fn(q.points[:, 0], q.points[:, 1])
            u[gd[len(pts):]] = ops.basis.values(q.points)[:, :nm].T @ (q.weights * vals) / ops.area
    return u


def compute_errh2(sol: Solution, hessian: Callable) -> float:
    """(sum_K |u - P_hess u_h|_{2,K}^2)^{1/2}; ``hessian(x, y)`` returns (u_xx, u_xy, u_yy)."""
    total = 0.0
    samples = cell_samples(sol.disc, hessian)
    for cid, ops in enumerate(sol.disc.ops):
        q = ops.quad
        uxx, uxy, uyy = samples[cid]
        V = ops.basis.values(q.points)
        c = sol.hess_coeffs[cid]
        hxx, hxy, hyy = (V @ (T @ c) for T in ops.basis.hessian_tables())
        total += float(q.weights @ ((uxx - hxx) ** 2 + 2 * (uxy - hxy) ** 2 + (uyy - hyy) ** 2))
    return float(np.sqrt(total))
