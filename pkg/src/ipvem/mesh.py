"""Polygonal meshes: storage, edge topology, quality checks, generation and I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class MeshError(ValueError):
    """Base class for mesh problems."""


class TopologyError(MeshError):
    pass


class GeometryError(MeshError):
    pass


class MeshFormatError(MeshError):
    pass


def polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def polygon_diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


@dataclass(frozen=True, eq=False)
class PolygonalMesh:
    """Vertices plus counter-clockwise vertex cycles.

    Hanging nodes are ordinary vertices of every cell whose boundary they
    lie on, so neighbouring cells always see the same edges.
    """

    vertices: np.ndarray
    cells: tuple[tuple[int, ...], ...]
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cells", tuple(tuple(int(i) for i in c) for c in self.cells))
        for cid, c in enumerate(self.cells):
            if len(c) < 3:
                raise GeometryError(f"cell {cid} has fewer than 3 vertices")
            if len(set(c)) != len(c):
                raise GeometryError(f"cell {cid} repeats a vertex")
            if min(c) < 0 or max(c) >= len(v):
                raise MeshFormatError(f"cell {cid} references a vertex index out of range")
            if polygon_area(v[list(c)]) <= 0.0:
                raise GeometryError(f"cell {cid} is not positively oriented")

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def cell_points(self, cid: int) -> np.ndarray:
        return self.vertices[list(self.cells[cid])]

    @cached_property
    def areas(self) -> np.ndarray:
        return np.array([polygon_area(self.cell_points(c)) for c in range(self.n_cells)])

    @cached_property
    def centroids(self) -> np.ndarray:
        return np.array([polygon_centroid(self.cell_points(c)) for c in range(self.n_cells)])

    @cached_property
    def diameters(self) -> np.ndarray:
        return np.array([polygon_diameter(self.cell_points(c)) for c in range(self.n_cells)])

    @cached_property
    def edges(self) -> EdgeTable:
        return build_edge_table(self)

    def same_as(self, other: PolygonalMesh) -> bool:
        return (self.cells == other.cells and self.vertices.shape == other.vertices.shape
                and bool(np.array_equal(self.vertices, other.vertices)))


@dataclass(frozen=True, eq=False)
class EdgeTable:
    """Global edges with two-sided adjacency.

    Edge ``e`` runs ``verts[e, 0] -> verts[e, 1]`` in the counter-clockwise
    direction of its minus cell ``minus[e]``; ``normals[e]`` is the outward
    normal of that cell, so it points towards ``plus[e]`` (``-1`` on the
    boundary). ``tangents`` is the normal rotated by +90 degrees.
    """

    verts: np.ndarray
    minus: np.ndarray
    plus: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    lengths: np.ndarray
    midpoints: np.ndarray
    cell_edges: tuple[tuple[int, ...], ...]
    cell_edge_signs: tuple[tuple[int, ...], ...]
    lookup: dict

    @property
    def n_edges(self) -> int:
        return len(self.verts)

    @property
    def boundary(self) -> np.ndarray:
        return self.plus < 0

    @property
    def interior(self) -> np.ndarray:
        return self.plus >= 0

    def edge_id(self, a: int, b: int) -> int:
        return self.lookup[(a, b) if a < b else (b, a)]


def build_edge_table(mesh: PolygonalMesh) -> EdgeTable:
    """Number edges in order of first appearance while walking the cells."""
    lookup: dict[tuple[int, int], int] = {}
    verts, minus, plus = [], [], []
    cell_edges, cell_signs = [], []
    for cid, cyc in enumerate(mesh.cells):
        ids, signs = [], []
        n = len(cyc)
        for j in range(n):
            a, b = cyc[j], cyc[(j + 1) % n]
            key = (a, b) if a < b else (b, a)
            eid = lookup.get(key)
            if eid is None:
                eid = len(verts)
                lookup[key] = eid
                verts.append((a, b))
                minus.append(cid)
                plus.append(-1)
                signs.append(1)
            else:
                if plus[eid] >= 0:
                    raise TopologyError(f"edge {key} is shared by more than two cells")
                if verts[eid] != (b, a):
                    raise TopologyError(f"edge {key} traversed in the same direction by two cells")
                plus[eid] = cid
                signs.append(-1)
            ids.append(eid)
        cell_edges.append(tuple(ids))
        cell_signs.append(tuple(signs))

    verts = np.array(verts, dtype=np.int64).reshape(-1, 2)
    p0 = mesh.vertices[verts[:, 0]]
    p1 = mesh.vertices[verts[:, 1]]
    d = p1 - p0
    lengths = np.hypot(d[:, 0], d[:, 1])
    if np.any(lengths == 0.0):
        raise GeometryError("zero-length edge")
    tangents = d / lengths[:, None]
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    return EdgeTable(
        verts=verts,
        minus=np.array(minus, dtype=np.int64),
        plus=np.array(plus, dtype=np.int64),
        normals=normals,
        tangents=tangents,
        lengths=lengths,
        midpoints=0.5 * (p0 + p1),
        cell_edges=tuple(cell_edges),
        cell_edge_signs=tuple(cell_signs),
        lookup=lookup,
    )


# -- quality checks ---------------------------------------------------------

@dataclass
class CellQuality:
    cell: int
    star_shaped: bool
    edge_ratio: float
    min_angle: float  # degrees, over the centroid fan


@dataclass
class MeshReport:
    cells: list[CellQuality]
    violations: list[str]
    total_area: float

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class QualityThresholds:
    min_edge_ratio: float = 1e-3
    min_fan_angle: float = 1.0


def _fan_angles(c: np.ndarray, p: np.ndarray, q: np.ndarray) -> list[float]:
    out = []
    tri = (c, p, q)
    for i in range(3):
        a, b, d = tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]
        u, v = b - a, d - a
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0 or nv == 0:
            out.append(0.0)
            continue
        cosang = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
        out.append(math.degrees(math.acos(cosang)))
    return out


def validate_mesh(mesh: PolygonalMesh, thresholds: QualityThresholds = QualityThresholds()) -> MeshReport:
    """Per-cell centroid star-shapedness, edge-length ratio and fan angles."""
    cells, violations = [], []
    for cid in range(mesh.n_cells):
        pts = mesh.cell_points(cid)
        c = mesh.centroids[cid]
        n = len(pts)
        nxt = np.roll(pts, -1, axis=0)
        fan = 0.5 * ((pts[:, 0] - c[0]) * (nxt[:, 1] - c[1]) - (nxt[:, 0] - c[0]) * (pts[:, 1] - c[1]))
        star = bool(np.all(fan > 1e-14 * mesh.areas[cid]))
        el = np.linalg.norm(nxt - pts, axis=1)
        ratio = float(el.min() / el.max())
        angle = min(min(_fan_angles(c, pts[j], nxt[j])) for j in range(n))
        cells.append(CellQuality(cid, star, ratio, angle))
        if not star:
            violations.append(f"cell {cid}: not star-shaped with respect to its centroid")
        if ratio < thresholds.min_edge_ratio:
            violations.append(f"cell {cid}: edge ratio {ratio:.3g} below {thresholds.min_edge_ratio}")
        if angle < thresholds.min_fan_angle:
            violations.append(f"cell {cid}: fan angle {angle:.3g} deg below {thresholds.min_fan_angle}")
    return MeshReport(cells, violations, float(mesh.areas.sum()))


# -- generation -------------------------------------------------------------

def generate_square_mesh(n: int, domain: str = "square", box=((0.0, 1.0), (0.0, 1.0))) -> PolygonalMesh:
    """Uniform n-by-n quadrilaterals on ``box``.

    ``domain="lshape"`` drops the cells whose centre lies in the lower-right
    quadrant ``[1/2, 1] x [0, 1/2]`` of the box.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    (x0, x1), (y0, y1) = box
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    keep = []
    for j in range(n):
        for i in range(n):
            if domain == "lshape":
                cx = (xs[i] + xs[i + 1]) / 2
                cy = (ys[j] + ys[j + 1]) / 2
                if cx > x0 + 0.5 * (x1 - x0) and cy < y0 + 0.5 * (y1 - y0):
                    continue
            elif domain != "square":
                raise ValueError(f"unknown domain {domain!r}")
            keep.append((i, j))
    grid = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = [(grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1)) for i, j in keep]
    used = sorted({v for c in cells for v in c})
    remap = {old: new for new, old in enumerate(used)}
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])[used]
    return PolygonalMesh(pts, tuple(tuple(remap[v] for v in c) for c in cells))


# -- I/O --------------------------------------------------------------------

def _orient(vertices: np.ndarray, cells: list[list[int]]) -> tuple[list[list[int]], list[str]]:
    notes = []
    out = []
    for cid, c in enumerate(cells):
        if len(c) < 3:
            raise MeshFormatError(f"cell {cid}: open polygon (fewer than 3 vertices)")
        if len(set(c)) != len(c):
            raise MeshFormatError(f"cell {cid}: repeated vertex in cycle")
        if min(c) < 0 or max(c) >= len(vertices):
            raise MeshFormatError(f"cell {cid}: vertex index out of range")
        if polygon_area(vertices[c]) < 0:
            c = c[::-1]
            notes.append(f"cell {cid}: clockwise cycle reoriented")
        out.append(c)
    return out, notes


def save_mesh(mesh: PolygonalMesh, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps({"vertices": mesh.vertices.tolist(), "cells": [list(c) for c in mesh.cells]})
    lines = [f"VERTICES {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"CELLS {mesh.n_cells}")
    lines += [" ".join(map(str, c)) for c in mesh.cells]
    return "\n".join(lines) + "\n"


def load_mesh(text: str) -> PolygonalMesh:
    """Parse the two-section text format or its JSON equivalent."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
            verts = np.array(data["vertices"], dtype=float).reshape(-1, 2)
            cells = [[int(i) for i in c] for c in data["cells"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise MeshFormatError(f"malformed JSON mesh: {exc}") from exc
    else:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        try:
            head = lines[0].split()
            if head[0].upper() != "VERTICES":
                raise MeshFormatError("expected 'VERTICES n' header")
            nv = int(head[1])
            verts = np.array([[float(t) for t in ln.split()] for ln in lines[1:1 + nv]], dtype=float)
            if verts.shape != (nv, 2):
                raise MeshFormatError("vertex records must have exactly two coordinates")
            head = lines[1 + nv].split()
            if head[0].upper() != "CELLS":
                raise MeshFormatError("expected 'CELLS m' header")
            nc = int(head[1])
            cells = [[int(t) for t in ln.split()] for ln in lines[2 + nv:2 + nv + nc]]
            if len(cells) != nc:
                raise MeshFormatError(f"expected {nc} cell records, found {len(cells)}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, MeshFormatError):
                raise
            raise MeshFormatError(f"malformed mesh record: {exc}") from exc
    cells, notes = _orient(verts, cells)
    return PolygonalMesh(verts, tuple(tuple(c) for c in cells), tuple(notes))
