import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.stats import qmc

from helpers import point_in_triangle_2d, random_triangle, stacked_interface, two_triangles
from mortarcontact.contact import (EDGE, FACE, POINT, BarrierParams, build_candidate_pairs,
                                   build_contact_state, contact_energy_grad_hess, contact_normal_force,
                                   sample_edge, sample_face, sample_point)
from mortarcontact.geometry import GeometryError, SurfaceMesh, make_block, extract_boundary_surface

P = BarrierParams(kappa=1e6, eps_max=1e-3)
S = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
AREA = 0.5


# ------------------------------------------------------------------ broadphase

def test_pairs_far_apart_empty():
    slave, master, x, nb = stacked_interface(gap=1.0)
    pairs = build_candidate_pairs(slave, master, 0.01, x)
    assert pairs.n_pairs == 0


def test_pairs_match_brute_force():
    slave, master, x, _ = stacked_interface()
    r = 0.004
    pairs = build_candidate_pairs(slave, master, r, x)
    xs, xm = x[slave.vertex_map], x[master.vertex_map]
    expect = set()
    for i, ts in enumerate(slave.triangles):
        a = xs[ts]
        for j, tm in enumerate(master.triangles):
            b = xm[tm]
            # xy overlap of the two triangles' boxes with strictly positive measure, and within r in z
            ov = np.all(np.minimum(a.max(0), b.max(0))[:2] - np.maximum(a.min(0), b.min(0))[:2] > 1e-12)
            if ov and b[:, 2].min() - a[:, 2].max() <= r:
                expect.add((i, j))
    got = set(map(tuple, pairs.face_pairs))
    assert expect <= got
    # every extra pair only touches along a box boundary
    for i, j in got - expect:
        a, b = xs[slave.triangles[i]], xm[master.triangles[j]]
        assert np.any(np.minimum(a.max(0), b.max(0))[:2] - np.maximum(a.min(0), b.min(0))[:2] <= 1e-12)


def test_pairs_self_contact_rejected():
    surf = extract_boundary_surface(make_block((1, 1, 1), (1, 1, 1)))
    with pytest.raises(GeometryError):
        build_candidate_pairs(surf, surf, 0.1)


# ------------------------------------------------------------------ face samples

def test_face_parallel_offset():
    h = 7e-4
    out = sample_face(S, S + [0, 0, h], P)
    assert_allclose(sum(s.w for s in out), AREA, rtol=1e-12)
    assert_allclose([s.gap for s in out], h, rtol=1e-12)
    assert all(s.sample_type == FACE for s in out)


def test_face_disjoint():
    assert sample_face(S, S + [5, 5, 1e-3], P) == []


def test_face_half_cover():
    # master: the half of the slave triangle on the x <= 0.5 side of a midline, slightly lifted
    half = np.array([[0.0, 0, 0], [0.5, 0, 0], [0.0, 1, 0]]) + [0, 0, 1e-3]
    out = sample_face(S, half, P)
    assert_allclose(sum(s.w for s in out), AREA / 2, rtol=1e-10)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_partition_of_unity_coplanar_cover(order, rng):
    params = BarrierParams(quad_order_face=order)
    slave = random_triangle(rng)
    c = slave.mean(0)
    lo, hi = slave.min(0) - 0.3, slave.max(0) + 0.3
    # a coplanar master triangulation covering the slave: fan around an interior point
    corners = np.array([[lo[0], lo[1], 0], [hi[0], lo[1], 0], [hi[0], hi[1], 0], [lo[0], hi[1], 0]])
    h = 3e-4
    total = 0.0
    for k in range(4):
        mt = np.array([c, corners[(k + 1) % 4], corners[k]]) + [0, 0, h]
        out = sample_face(slave, mt, params)
        total += sum(s.w for s in out)
        assert_allclose([s.gap for s in out] or [h], h, rtol=1e-12)
    area = 0.5 * np.linalg.norm(np.cross(slave[1] - slave[0], slave[2] - slave[0]))
    assert_allclose(total, area, rtol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1e-2), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.integers(1, 4))
def test_gap_exact_for_rigid_offset(h, dx, dy, order):
    params = BarrierParams(quad_order_face=order, quad_order_edge=order)
    rot = np.array([[0.8, -0.6, 0], [0.6, 0.8, 0], [0, 0, 1.0]])
    tilt = np.array([[1, 0, 0], [0, np.cos(0.3), -np.sin(0.3)], [0, np.sin(0.3), np.cos(0.3)]])
    slave = S @ (tilt @ rot).T
    n = np.cross(slave[1] - slave[0], slave[2] - slave[0])
    n /= np.linalg.norm(n)
    t1 = (slave[1] - slave[0]) / np.linalg.norm(slave[1] - slave[0])
    master = slave + h * n + dx * t1 + dy * np.cross(n, t1)
    gaps = [s.gap for s in sample_face(slave, master, params)]
    gaps += [s.gap for s in sample_edge(slave, master[[0, 1]], params)]
    gaps += [s.gap for s in (sample_point(slave, master[k], params) for k in range(3)) if s is not None]
    assert gaps
    # relative 1e-12, floored at the round-off of O(1) coordinates
    assert_allclose(gaps, h, rtol=1e-12, atol=1e-15)


def _mc_overlap(a, b, seed, n=2 ** 20):
    """Quasi-Monte Carlo overlap area (scrambled Sobol points over the common box)."""
    lo, hi = np.maximum(a.min(0), b.min(0))[:2], np.minimum(a.max(0), b.max(0))[:2]
    if np.any(hi <= lo):
        return 0.0
    u = qmc.Sobol(2, scramble=True, seed=seed).random(n)
    pts = lo + u * (hi - lo)
    inside = point_in_triangle_2d(pts, a) & point_in_triangle_2d(pts, b)
    return inside.mean() * np.prod(hi - lo)


def test_face_overlap_vs_monte_carlo(rng):
    checked = 0
    while checked < 5:
        a = random_triangle(rng, min_area=0.2)
        b = random_triangle(rng, min_area=0.2) * 0.8 + [0.1, 0.05, 1e-3]
        exact = sum(s.w for s in sample_face(a, b, P))
        if exact < 0.1:
            continue
        mc = _mc_overlap(a, b, checked)
        assert abs(exact - mc) / exact <= 1e-3
        checked += 1


# ------------------------------------------------------------------ edge samples

def test_edge_full_crossing():
    h = 5e-4
    E = np.array([[-1.0, 0.25, h], [2.0, 0.25, h]])
    out = sample_edge(S, E, P)
    assert_allclose([s.gap for s in out], h, rtol=1e-12)
    assert_allclose(sum(s.w for s in out), 0.75, rtol=1e-12)
    assert all(s.sample_type == EDGE for s in out)


def test_edge_outside():
    assert sample_edge(S, np.array([[2.0, 2, 1e-3], [3.0, 2, 1e-3]]), P) == []


def _bisect_exit(p_in, p_out, tri, iters=80):
    a, b = p_in.copy(), p_out.copy()
    for _ in range(iters):
        m = 0.5 * (a + b)
        if point_in_triangle_2d(m, tri):
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def test_edge_interval_endpoint_bisection(rng):
    for _ in range(10):
        tri = random_triangle(rng, min_area=0.2)
        inner = tri.mean(0) + [0, 0, 1e-3]
        out_pt = inner + np.r_[rng.normal(size=2) * 5, 0]
        E = np.array([inner, out_pt])
        samples = sample_edge(tri, E, P)
        length = sum(s.w for s in samples)
        exit_pt = _bisect_exit(inner, out_pt, tri)
        assert abs(length - np.linalg.norm((exit_pt - inner)[:2])) <= 1e-9


def test_edge_length_vs_monte_carlo(rng):
    for _ in range(5):
        tri = random_triangle(rng, min_area=0.2)
        E = np.array([[-1.5, rng.uniform(-0.5, 0.5), 1e-3], [1.5, rng.uniform(-0.5, 0.5), 1e-3]])
        exact = sum(s.w for s in sample_edge(tri, E, P))
        t = qmc.Sobol(1, scramble=True, seed=1).random(2 ** 20)[:, 0]
        pts = E[0] + t[:, None] * (E[1] - E[0])
        mc = point_in_triangle_2d(pts, tri).mean() * np.linalg.norm((E[1] - E[0])[:2])
        if exact == 0:
            assert mc == 0
            continue
        assert abs(exact - mc) / exact <= 1e-3


# ------------------------------------------------------------------ point samples

def test_point_above_centroid():
    s = sample_point(S, S.mean(0) + [0, 0, 4e-4], P)
    assert s.sample_type == POINT
    assert_allclose(s.gap, 4e-4, rtol=1e-12)
    assert_allclose(s.slave_bary, [1 / 3] * 3, atol=1e-15)


def test_point_outside():
    assert sample_point(S, np.array([2.0, 2.0, 1e-3]), P) is None


def test_point_on_shared_edge_dedup():
    # two slave triangles sharing the diagonal; one master vertex above its midpoint
    sv = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
    slave = SurfaceMesh(sv, [[0, 1, 2], [0, 2, 3]], vertex_map=np.arange(4))
    mv = np.array([[0.5, 0.5, 5e-4], [3.0, 0.5, 5e-4], [0.5, 3.0, 5e-4]])
    master = SurfaceMesh(mv, [[0, 2, 1]], vertex_map=np.arange(4, 7))
    x = np.vstack([sv, mv])
    st_ = build_contact_state(build_candidate_pairs(slave, master, 4e-3, x), x, P)
    pts = st_.stype == POINT
    hit = st_.slave_tri[pts & (st_.feature == 0)]
    assert list(hit) == [0]


# ------------------------------------------------------------------ frozen state

def test_state_silent_at_reference():
    slave, master, x, _ = stacked_interface()
    st_ = build_contact_state(build_candidate_pairs(slave, master, P.radius, x), x, P)
    assert len(st_) > 0
    assert np.all(st_.eps < st_.g_ref)
    E, g, _ = contact_energy_grad_hess(st_, x)
    assert E == 0.0 and np.all(g == 0.0)
    assert contact_normal_force(st_, x)["total"] == 0.0


def test_state_face_weights_cover_each_slave_triangle():
    slave, master, x, _ = stacked_interface()
    st_ = build_contact_state(build_candidate_pairs(slave, master, P.radius, x), x, P)
    face = st_.stype == FACE
    per_tri = np.bincount(st_.slave_tri[face], weights=st_.w[face], minlength=len(slave.triangles))
    assert_allclose(per_tri, slave.areas(), rtol=1e-8)


def test_state_compensation_preserves_total_area():
    slave, master, x, _ = stacked_interface()
    st_ = build_contact_state(build_candidate_pairs(slave, master, P.radius, x), x, P)
    assert_allclose(st_.coef.sum() / P.kappa, 1.0, rtol=1e-10)


def test_state_empty_pairs():
    slave, master, x, _ = stacked_interface(gap=1.0)
    st_ = build_contact_state(build_candidate_pairs(slave, master, 0.01, x), x, P)
    assert len(st_) == 0
    E, g, H = contact_energy_grad_hess(st_, x)
    assert E == 0 and H.nnz == 0


def test_state_scalar_kappa_overrides():
    slave, master, x, _ = stacked_interface()
    p = BarrierParams(kappa=1e6, kappa_edge=5.0, kappa_point=7.0)
    st_ = build_contact_state(build_candidate_pairs(slave, master, p.radius, x), x, p)
    assert np.all(st_.kappa[st_.stype == EDGE] == 5.0)
    assert np.all(st_.kappa[st_.stype == POINT] == 7.0)
    assert np.all(st_.kappa[st_.stype == FACE] == 1e6)


def test_state_mean_edge_rule():
    slave, master, x, _ = stacked_interface()
    p = BarrierParams(kappa=1e6, kappa_edge="mean-edge", kappa_point="mean-edge")
    st_ = build_contact_state(build_candidate_pairs(slave, master, p.radius, x), x, p)
    lbar = st_.info["mean_slave_edge"]
    assert_allclose(st_.kappa[st_.stype == EDGE], 1e6 * lbar)
    assert_allclose(st_.kappa[st_.stype == POINT], 1e6 * lbar ** 2)
