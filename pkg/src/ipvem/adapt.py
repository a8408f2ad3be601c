"""Doerfler marking and midpoint/barycenter refinement with the one-hanging-node rule.

Hanging nodes are ordinary polygon vertices. A vertex is a hanging node of a
cell when the cell's two sides meeting there are collinear; the remaining
vertices are the cell's corners.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mesh import GeometryError, PolygonalMesh, polygon_centroid

log = logging.getLogger(__name__)

COLLINEAR_TOL = 1e-9


@dataclass(frozen=True)
class MarkSet:
    cells: tuple[int, ...]
    theta: float
    fraction: float


@dataclass(frozen=True)
class RefinePlan:
    """Cells to subdivide: the marked ones plus those pulled in by the closure."""

    cells: tuple[int, ...]
    marked: tuple[int, ...]

    @property
    def added(self) -> tuple[int, ...]:
        m = set(self.marked)
        return tuple(c for c in self.cells if c not in m)


def dorfler_mark(indicators, theta: float) -> MarkSet:
    """Smallest prefix of the descending eta_K ordering (ties by id) with sum eta^2 >= theta * total."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    eta = np.asarray(indicators, dtype=float)
    if eta.ndim != 1 or np.any(~np.isfinite(eta)) or np.any(eta < 0):
        raise ValueError("indicators must be a finite, non-negative 1D sequence")
    sq = eta**2
    total = float(sq.sum())
    if total == 0.0:
        log.warning("all indicators vanish; nothing to mark")
        return MarkSet((), theta, 0.0)
    order = np.lexsort((np.arange(len(eta)), -eta))
    csum = np.cumsum(sq[order])
    n = int(np.searchsorted(csum, theta * total, side="left")) + 1
    n = min(n, len(eta))
    return MarkSet(tuple(int(c) for c in order[:n]), theta, float(csum[n - 1] / total))


def hanging_flags(mesh: PolygonalMesh, cid: int, tol: float = COLLINEAR_TOL) -> np.ndarray:
    """Boolean per vertex of the cycle: True where the cell's boundary goes straight through."""
    p = mesh.cell_points(cid)
    a = p - np.roll(p, 1, axis=0)
    b = np.roll(p, -1, axis=0) - p
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = np.einsum("ij,ij->i", a, b)
    scale = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    return (np.abs(cross) <= tol * scale) & (dot > 0)


def cell_sides(mesh: PolygonalMesh, cid: int) -> list[list[int]]:
    """Straight sides as vertex lists from corner to next corner, with hanging nodes in between."""
    cyc = mesh.cells[cid]
    flags = hanging_flags(mesh, cid)
    corners = [i for i in range(len(cyc)) if not flags[i]]
    if len(corners) < 3:
        raise GeometryError(f"cell {cid} has fewer than three corners")
    sides = []
    for j, start in enumerate(corners):
        end = corners[(j + 1) % len(corners)]
        idx = [start]
        i = start
        while i != end:
            i = (i + 1) % len(cyc)
            idx.append(i)
        sides.append([cyc[i] for i in idx])
    return sides


def hanging_audit(mesh: PolygonalMesh) -> list[str]:
    """Violations of the one-hanging-node rule (empty when the mesh is admissible)."""
    bad = []
    for cid in range(mesh.n_cells):
        for side in cell_sides(mesh, cid):
            if len(side) > 3:
                bad.append(f"cell {cid}: side {side[0]}->{side[-1]} carries {len(side) - 2} hanging nodes")
    return bad


def _hanging_vertices(mesh: PolygonalMesh, cid: int) -> set[int]:
    cyc = mesh.cells[cid]
    return {cyc[i] for i in np.flatnonzero(hanging_flags(mesh, cid))}


def expand_plan(mesh: PolygonalMesh, marked) -> RefinePlan:
    """Close the marked set under the joint-refinement rule, iterated to a fixed point.

    A marked cell K1 pulls in an unmarked neighbour K2 across a shared edge
    when one endpoint of that edge is a hanging node of K2.
    """
    marked = tuple(sorted({int(c) for c in marked}))
    if any(c < 0 or c >= mesh.n_cells for c in marked):
        raise IndexError("marked cell id out of range")
    edges = mesh.edges
    hanging = [None] * mesh.n_cells
    plan = set(marked)
    frontier = list(marked)
    while frontier:
        new = []
        for k1 in frontier:
            for e in edges.cell_edges[k1]:
                k2 = edges.plus[e] if edges.minus[e] == k1 else edges.minus[e]
                if k2 < 0 or k2 in plan:
                    continue
                if hanging[k2] is None:
                    hanging[k2] = _hanging_vertices(mesh, k2)
                if hanging[k2] & set(edges.verts[e].tolist()):
                    plan.add(int(k2))
                    new.append(int(k2))
        frontier = new
    return RefinePlan(tuple(sorted(plan)), marked)


def _check_star(pts: np.ndarray, c: np.ndarray, cid: int):
    q = np.roll(pts, -1, axis=0)
    tri = (pts[:, 0] - c[0]) * (q[:, 1] - c[1]) - (pts[:, 1] - c[1]) * (q[:, 0] - c[0])
    if np.any(tri <= 0):
        raise GeometryError(f"barycenter of cell {cid} does not see the whole boundary")


def refine_mesh(mesh: PolygonalMesh, plan: RefinePlan) -> PolygonalMesh:
    """Split every planned cell into one quadrilateral per corner.

    Each child is (corner, midpoint of the next side, barycenter, midpoint of
    the previous side). A side's midpoint is its existing hanging node, or a
    new vertex shared through the side's corner pair. New midpoints on sides
    of cells that stay unrefined are inserted into their cycles.
    """
    verts = [v for v in mesh.vertices]
    midpoint_of: dict[tuple[int, int], int] = {}
    refine = set(plan.cells)
    new_cells: list[list[int]] = []

    def new_vertex(x) -> int:
        verts.append(np.asarray(x, dtype=float))
        return len(verts) - 1

    for cid in range(mesh.n_cells):
        if cid not in refine:
            new_cells.append(list(mesh.cells[cid]))
            continue
        pts = mesh.cell_points(cid)
        bary = polygon_centroid(pts)
        _check_star(pts, bary, cid)
        mids = []
        for side in cell_sides(mesh, cid):
            if len(side) == 3:
                mids.append(side[1])
            elif len(side) == 2:
                key = (min(side), max(side))
                if key not in midpoint_of:
                    midpoint_of[key] = new_vertex(0.5 * (mesh.vertices[side[0]] + mesh.vertices[side[1]]))
                mids.append(midpoint_of[key])
            else:
                raise GeometryError(f"cell {cid} violates the one-hanging-node rule; expand the plan first")
        corners = [s[0] for s in cell_sides(mesh, cid)]
        b = new_vertex(bary)
        m = len(corners)
        for i in range(m):
            new_cells.append([corners[i], mids[i], b, mids[i - 1]])

    # Insert fresh midpoints into whichever cell still carries the full segment.
    owner: dict[tuple[int, int], int] = {}
    for ci, cyc in enumerate(new_cells):
        for j in range(len(cyc)):
            owner[(cyc[j], cyc[(j + 1) % len(cyc)])] = ci
    for (a, b), mid in sorted(midpoint_of.items()):
        for s, t in ((a, b), (b, a)):
            ci = owner.get((s, t))
            if ci is None:
                continue
            cyc = new_cells[ci]
            j = next(j for j in range(len(cyc)) if cyc[j] == s and cyc[(j + 1) % len(cyc)] == t)
            cyc.insert(j + 1, mid)
            owner[(s, mid)] = ci
            owner[(mid, t)] = ci
            del owner[(s, t)]
    out = PolygonalMesh(np.array(verts), tuple(tuple(c) for c in new_cells))
    before, after = float(mesh.areas.sum()), float(out.areas.sum())
    if abs(after - before) > 1e-12 * max(abs(before), 1.0):
        raise GeometryError(f"refinement changed the total area from {before!r} to {after!r}")
    return out


def mark_and_refine(mesh: PolygonalMesh, indicators, theta: float) -> tuple[PolygonalMesh, MarkSet, RefinePlan]:
    marks = dorfler_mark(indicators, theta)
    plan = expand_plan(mesh, marks.cells)
    return refine_mesh(mesh, plan), marks, plan


def refine_uniform(mesh: PolygonalMesh) -> PolygonalMesh:
    return refine_mesh(mesh, RefinePlan(tuple(range(mesh.n_cells)), tuple(range(mesh.n_cells))))

