import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from mortarcontact.fem import (Material, build_element_operators, element_strain, element_stress,
                               element_stresses, elastic_energy, elastic_energy_grad_hess,
                               nodal_stresses, pressure_load_forces, stiffness_matrix)
from mortarcontact.geometry import SurfaceMesh, TetMesh, extract_boundary_surface, make_block


def _unit_tet(scale=1.0, shift=(0, 0, 0)):
    v = scale * np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]) + np.asarray(shift)
    return TetMesh(v, [[0, 1, 2, 3]])


def test_unit_tet_operator():
    op = build_element_operators(_unit_tet())[0]
    assert_allclose(op.rest_volume, 1 / 6)
    assert_allclose(op.shape_gradients[1], [1, 0, 0])
    assert_allclose(op.shape_gradients.sum(axis=0), 0, atol=1e-15)


def test_operator_translation_and_scaling():
    a = build_element_operators(_unit_tet())[0]
    b = build_element_operators(_unit_tet(shift=(3.0, -2.0, 7.5)))[0]
    c = build_element_operators(_unit_tet(scale=2.0))[0]
    assert_allclose(b.shape_gradients, a.shape_gradients, atol=1e-14)
    assert_allclose(b.rest_volume, a.rest_volume, rtol=1e-13)
    assert_allclose(c.rest_volume, 8 * a.rest_volume)
    assert_allclose(c.shape_gradients, 0.5 * a.shape_gradients)


def test_element_strain_examples():
    mesh = _unit_tet()
    op = build_element_operators(mesh)[0]
    assert_allclose(element_strain(op, np.zeros((4, 3))), 0)
    assert_allclose(element_strain(op, np.tile([0.3, -1.0, 2.0], (4, 1))), 0, atol=1e-15)
    u = np.zeros((4, 3))
    u[:, 2] = -0.01 * mesh.vertices[:, 2]
    assert_allclose(element_strain(op, u), [0, 0, -0.01, 0, 0, 0], atol=1e-16)


def test_element_stress_examples():
    sig = element_stress(Material(1000, 0), np.array([0, 0, -0.01, 0, 0, 0.0]))
    assert_allclose(sig, [0, 0, -10, 0, 0, 0], atol=1e-13)
    assert_allclose(element_stress(Material(1000, 0.2), np.zeros(6)), 0)
    mat = Material(2.1e11, 0.3)
    d = 1e-4
    lam = 2.1e11 * 0.3 / (1.3 * 0.4)
    mu = 2.1e11 / 2.6
    sig = element_stress(mat, np.array([d, d, d, 0, 0, 0]))
    assert_allclose(sig, [(3 * lam + 2 * mu) * d] * 3 + [0] * 3, rtol=1e-13)


def test_material_rejects_incompressible():
    with pytest.raises(ValueError):
        Material(1.0, 0.5)
    with pytest.raises(ValueError):
        Material(-1.0, 0.2)


def _two_tets():
    v = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0.4, 0.5, -0.8]])
    return TetMesh(v, [[0, 1, 2, 3], [0, 2, 1, 4]])


def test_energy_rest_and_translation():
    m = _two_tets()
    ops = build_element_operators(m)
    mat = Material(10.0, 0.25)
    E, g, _ = elastic_energy_grad_hess(ops, mat, m.vertices, m.vertices)
    assert E == 0 and np.all(g == 0)
    E, g, _ = elastic_energy_grad_hess(ops, mat, m.vertices + [1.0, 2.0, 3.0], m.vertices)
    assert abs(E) < 1e-12
    assert_allclose(g, 0, atol=1e-12)


def _fd_grad(f, x, h):
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def test_energy_gradient_fd_two_tets(rng):
    m = _two_tets()
    ops = build_element_operators(m)
    mat = Material(10.0, 0.25)
    x = m.vertices + 1e-2 * rng.normal(size=m.vertices.shape)
    _, g, _ = elastic_energy_grad_hess(ops, mat, x, m.vertices)
    gfd = _fd_grad(lambda y: elastic_energy(ops, mat, y - m.vertices), x, 1e-6 * m.bbox_diagonal())
    assert_allclose(gfd, g, rtol=1e-6, atol=1e-6 * np.abs(g).max())


def test_gradient_fd_random_configurations(rng):
    m = make_block((1, 1, 0.5), (2, 1, 1))
    ops = build_element_operators(m)
    mat = Material(1000.0, 0.3)
    K = stiffness_matrix(ops, mat, m.n_vertices)
    for _ in range(100):
        x = m.vertices + 1e-2 * rng.normal(size=m.vertices.shape)
        _, g, _ = elastic_energy_grad_hess(ops, mat, x, m.vertices, K)
        gfd = _fd_grad(lambda y: elastic_energy(ops, mat, y - m.vertices), x, 1e-6)
        assert np.abs(gfd - g).max() / max(1.0, np.abs(g).max()) <= 1e-5


def test_hessian_symmetric_and_translation_nullspace():
    m = make_block((1, 2, 0.5), (2, 2, 1))
    K = stiffness_matrix(build_element_operators(m), Material(5.0, 0.2), m.n_vertices)
    assert abs(K - K.T).max() == 0
    t = np.tile([0.3, -0.2, 0.9], m.n_vertices)
    assert np.abs(K @ t).max() <= 1e-9 * abs(K).max()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=12, max_size=12), st.floats(0.0, 0.45))
def test_affine_field_stress_exact(vals, nu):
    A = np.reshape(vals[:9], (3, 3)) * 1e-3
    b = np.array(vals[9:])
    m = make_block((1, 1, 1), (2, 2, 2))
    mat = Material(100.0, nu)
    u = m.vertices @ A.T + b
    sig = element_stresses(build_element_operators(m), mat, u)
    eps = 0.5 * (A + A.T)
    ev = np.array([eps[0, 0], eps[1, 1], eps[2, 2], eps[0, 1], eps[1, 2], eps[0, 2]])
    ref = element_stress(mat, ev)
    assert np.abs(sig - ref).max() <= 1e-12 * max(1e-300, np.abs(ref).max()) + 1e-18


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3))
def test_energy_is_quadratic(t):
    rng = np.random.default_rng(1)
    m = make_block((1, 1, 1), (1, 1, 2))
    ops = build_element_operators(m)
    mat = Material(3.0, 0.1)
    u = rng.normal(size=m.vertices.shape)
    assert_allclose(elastic_energy(ops, mat, t * u), t * t * elastic_energy(ops, mat, u), rtol=1e-12, atol=1e-300)


def test_nodal_stresses_average_uniform_field():
    m = make_block((1, 1, 1), (2, 2, 2))
    ops = build_element_operators(m)
    s = np.tile(np.arange(6.0), (m.n_tets, 1))
    assert_allclose(nodal_stresses(ops, s, m.n_vertices), np.tile(np.arange(6.0), (m.n_vertices, 1)))


def test_pressure_single_triangle():
    v = np.array([[0.0, 0, 0], [np.sqrt(2), 0, 0], [0, np.sqrt(2), 0]])
    surf = SurfaceMesh(v, [[0, 1, 2]])
    f = pressure_load_forces(surf, [0], 10.0, (0, 0, -1))
    assert_allclose(f, np.tile([0, 0, -10 / 3], (3, 1)), rtol=1e-14)
    assert_allclose(pressure_load_forces(surf, [0], 0.0, (0, 0, -1)), 0)


def test_pressure_block_top():
    m = make_block((1, 1, 1), (3, 3, 1))
    surf = extract_boundary_surface(m)
    top = np.flatnonzero(surf.normals()[:, 2] > 0.9)
    assert_allclose(pressure_load_forces(surf, top, 10.0).sum(0), [0, 0, -10], atol=1e-12)
    assert_allclose(pressure_load_forces(surf, top, 10.0, (0, 0, -1)).sum(0), [0, 0, -10], atol=1e-12)
