import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy.spatial.transform import Rotation

from mortarcontact.geometry import GeometryError, SurfaceMesh, extract_boundary_surface, make_block
from mortarcontact.mapper import (nearest_triangles_brute_force, precompute_embedding,
                                  refinement_study, update_visual_positions)


@pytest.fixture
def sim_surface():
    return extract_boundary_surface(make_block((1.0, 0.7, 0.5), (3, 2, 2)))


def _visual(rng, surf, n=300, spread=0.05):
    tri = surf.vertices[surf.triangles]
    k = rng.integers(len(tri), size=n)
    a, b = rng.random(n), rng.random(n)
    flip = a + b > 1
    a[flip], b[flip] = 1 - a[flip], 1 - b[flip]
    p = tri[k, 0] + a[:, None] * (tri[k, 1] - tri[k, 0]) + b[:, None] * (tri[k, 2] - tri[k, 0])
    return p + spread * surf.normals()[k] * rng.uniform(-1, 1, n)[:, None]


def _diag(p):
    return np.linalg.norm(p.max(0) - p.min(0))


def test_identity_embedding(sim_surface):
    emb = precompute_embedding(sim_surface.vertices, sim_surface)
    assert_allclose(emb.delta, 0, atol=1e-15)
    for v, t in enumerate(emb.triangle):
        assert v in sim_surface.triangles[t]
    out = update_visual_positions(emb, sim_surface.vertices, sim_surface)
    assert np.abs(out - sim_surface.vertices).max() <= 1e-15


def test_offset_along_normal():
    surf = SurfaceMesh(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]), [[0, 1, 2]])
    emb = precompute_embedding([[0.2, 0.3, 0.125]], surf)
    assert_allclose(emb.delta, [0.125])
    assert_allclose(emb.bary.sum(axis=1), 1.0, atol=1e-12)


def test_tie_goes_to_lower_index():
    v = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
    surf = SurfaceMesh(v, [[1, 3, 2], [0, 1, 2]])
    p = [[0.5, 0.5, 0.3]]   # above the shared diagonal: equidistant from both
    assert precompute_embedding(p, surf).triangle[0] == 0
    assert nearest_triangles_brute_force(np.array(p), v[surf.triangles])[0] == 0


def test_bvh_equals_brute_force(rng, sim_surface):
    p = _visual(rng, sim_surface, 200, 0.3)
    a = precompute_embedding(p, sim_surface)
    b = precompute_embedding(p, sim_surface, brute_force=True)
    assert_array_equal(a.triangle, b.triangle)


def test_rest_reproduction(rng, sim_surface):
    p = _visual(rng, sim_surface)
    emb = precompute_embedding(p, sim_surface)
    assert_allclose(emb.bary.sum(axis=1), 1.0, atol=1e-12)
    out = update_visual_positions(emb, sim_surface.vertices, sim_surface)
    assert np.abs(out - p).max() <= 1e-12 * _diag(p)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_rigid_equivariance(rotvec, t):
    rng = np.random.default_rng(7)
    surf = extract_boundary_surface(make_block((1.0, 0.7, 0.5), (2, 2, 1)))
    p = _visual(rng, surf, 100)
    R = Rotation.from_rotvec(np.pi * np.asarray(rotvec)).as_matrix()
    emb = precompute_embedding(p, surf)
    out = update_visual_positions(emb, surf.vertices @ R.T + t, surf)
    ref = p @ R.T + t
    assert np.abs(out - ref).max() <= 1e-10 * max(_diag(ref), np.abs(ref).max())


def test_affine_reproduction_on_surface(rng, sim_surface):
    p = _visual(rng, sim_surface, spread=0.0)
    emb = precompute_embedding(p, sim_surface)
    A = np.eye(3) + 0.3 * rng.normal(size=(3, 3))
    out = update_visual_positions(emb, sim_surface.vertices @ A.T, sim_surface)
    assert np.abs(out - p @ A.T).max() <= 1e-12 * _diag(p)


def test_degenerate_deformed_triangle_named(sim_surface):
    p = sim_surface.vertices[sim_surface.triangles[4]].mean(0, keepdims=True)
    emb = precompute_embedding(p, sim_surface)
    x = sim_surface.vertices.copy()
    a, b, c = sim_surface.triangles[emb.triangle[0]]
    x[c] = x[a]
    with pytest.raises(GeometryError, match=f"triangle {emb.triangle[0]}"):
        update_visual_positions(emb, x, sim_surface)


def test_empty_surface_rejected():
    with pytest.raises(GeometryError):
        precompute_embedding([[0.0, 0, 0]], SurfaceMesh(np.zeros((0, 3)), np.zeros((0, 3), int)))


def test_refinement_ratio():
    h, err, ratio = refinement_study()
    assert_allclose(h[1:] / h[:-1], 0.5)
    assert np.all(ratio >= 3.0)
