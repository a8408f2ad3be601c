import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipvem.adapt import RefinePlan, refine_mesh
from ipvem.mesh import (GeometryError, MeshFormatError, PolygonalMesh, TopologyError, build_edge_table,
                        generate_square_mesh, load_mesh, polygon_area, save_mesh, validate_mesh)


def hexagon(r=1.0):
    t = np.pi / 3 * np.arange(6)
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


def _segments_cross(p, q, a, b):
    """Proper crossing of segments pq and ab (shared endpoints do not count)."""
    def orient(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])
    d1, d2 = orient(a, b, p), orient(a, b, q)
    d3, d4 = orient(p, q, a), orient(p, q, b)
    return d1 * d2 < 0 and d3 * d4 < 0


def centroid_sees_all(pts):
    area = polygon_area(pts)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    c = np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6 * area)
    n = len(pts)
    for v in pts:
        for j in range(n):
            if _segments_cross(c, v, pts[j], pts[(j + 1) % n]):
                return False
    return True


def test_square_grid_counts():
    m1 = generate_square_mesh(1)
    assert (m1.n_cells, m1.n_vertices) == (1, 4)
    m2 = generate_square_mesh(2)
    assert (m2.n_cells, m2.n_vertices) == (4, 9)
    assert generate_square_mesh(4, "lshape").n_cells == 12


def test_edge_table_counts_and_orientation():
    e = generate_square_mesh(2).edges
    assert e.n_edges == 12
    assert e.interior.sum() == 4 and e.boundary.sum() == 8
    np.testing.assert_allclose(np.linalg.norm(e.normals, axis=1), 1.0, atol=1e-14)
    rot = np.column_stack([-e.normals[:, 1], e.normals[:, 0]])
    np.testing.assert_allclose(e.tangents, rot, atol=1e-15)
    # n_e points from the minus cell towards the plus cell
    m = generate_square_mesh(2)
    for i in np.flatnonzero(e.interior):
        d = m.centroids[e.plus[i]] - m.centroids[e.minus[i]]
        assert d @ e.normals[i] > 0


def test_single_triangle_all_boundary():
    m = PolygonalMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), ((0, 1, 2),))
    assert m.edges.n_edges == 3
    assert m.edges.boundary.all()


def test_hanging_node_splits_coarse_side():
    base = generate_square_mesh(2)
    m = refine_mesh(base, RefinePlan((0,), (0,)))
    mid = next(i for i, v in enumerate(m.vertices.tolist()) if v == [0.5, 0.25])
    right = next(c for c in m.cells if mid in c and len(c) == 5)
    e = m.edges
    # the coarse neighbour's long side is two edges, each shared with one child
    for a, b in [(right[j], right[(j + 1) % 5]) for j in range(5)]:
        if mid in (a, b) and 0.5 in (m.vertices[a][0], m.vertices[b][0]):
            eid = e.edge_id(a, b)
            assert e.plus[eid] >= 0
    assert np.isclose(m.areas.sum(), 1.0, rtol=0, atol=1e-14)


def test_nonmanifold_edge_rejected():
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, -1], [0.5, 2.0]], dtype=float)
    m = PolygonalMesh(v, ((0, 1, 2, 3), (1, 0, 4), (0, 1, 5)))
    with pytest.raises(TopologyError):
        build_edge_table(m)


def test_zero_length_edge_rejected():
    v = np.array([[0, 0], [1, 0], [1, 0], [0, 1]], dtype=float)
    with pytest.raises(GeometryError):
        build_edge_table(PolygonalMesh(v, ((0, 1, 2, 3),)))


def test_validate_hexagon_and_square():
    rep = validate_mesh(PolygonalMesh(hexagon(), (tuple(range(6)),)))
    assert rep.ok and rep.cells[0].star_shaped
    assert rep.cells[0].edge_ratio == pytest.approx(1.0, abs=1e-12)
    sq = validate_mesh(generate_square_mesh(1))
    assert sq.cells[0].min_angle == pytest.approx(45.0, abs=1e-10)


def test_nonconvex_cell_centroid_outside():
    pts = np.array([[0, 0], [3, 0], [3, 0.2], [0.2, 0.2], [0.2, 3], [0, 3]], dtype=float)
    assert not centroid_sees_all(pts)  # independent oracle
    rep = validate_mesh(PolygonalMesh(pts, (tuple(range(6)),)))
    assert not rep.cells[0].star_shaped
    assert not rep.ok


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.floats(0.0, 0.45), st.integers(0, 10_000))
def test_star_shape_check_matches_segment_oracle(n, jitter, seed):
    rng = np.random.default_rng(seed)
    ang = 2 * np.pi * (np.arange(n) + rng.uniform(-jitter, jitter, n)) / n
    rad = rng.uniform(0.2, 1.0, n)
    pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    if polygon_area(pts) <= 1e-6:
        return
    rep = validate_mesh(PolygonalMesh(pts, (tuple(range(n)),)))
    assert rep.cells[0].star_shaped == centroid_sees_all(pts)


def test_area_sums_to_domain():
    for dom, area in (("square", 1.0), ("lshape", 0.75)):
        m = generate_square_mesh(8, dom)
        rep = validate_mesh(m)
        assert rep.ok
        assert rep.total_area == pytest.approx(area, rel=1e-10)


def test_round_trip_text_and_json():
    m = generate_square_mesh(2)
    for fmt in ("text", "json"):
        back = load_mesh(save_mesh(m, fmt))
        assert np.array_equal(back.vertices, m.vertices)
        assert back.cells == m.cells
    odd = PolygonalMesh(np.array([[0.1, 1 / 3], [1.0, 0.0], [2 / 7, 1.0]]), ((0, 1, 2),))
    assert np.array_equal(load_mesh(save_mesh(odd)).vertices, odd.vertices)


def test_load_errors_and_reorientation():
    with pytest.raises(MeshFormatError):
        load_mesh("VERTICES 3\n0 0\n1 0\n0 1\nCELLS 1\n0 1 7\n")
    with pytest.raises(MeshFormatError):
        load_mesh("VERTICES 3\n0 0\n1 0\n0 1\nCELLS 1\n0 1\n")
    with pytest.raises(MeshFormatError):
        load_mesh("VERTS 3\n")
    with pytest.raises(MeshFormatError):
        load_mesh(json.dumps({"vertices": [[0, 0]]}))
    m = load_mesh("VERTICES 3\n0 0\n0 1\n1 0\nCELLS 1\n0 1 2\n")
    assert polygon_area(m.cell_points(0)) > 0
    assert m.diagnostics and "reoriented" in m.diagnostics[0]


def test_edge_table_deterministic():
    m = generate_square_mesh(5, "lshape")
    a = build_edge_table(m)
    b = build_edge_table(load_mesh(save_mesh(m)))
    assert np.array_equal(a.verts, b.verts) and np.array_equal(a.minus, b.minus)
