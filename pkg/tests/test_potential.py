import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from helpers import active_configs as _active_configs, stacked_interface, two_triangles
from mortarcontact import _kernels
from mortarcontact.contact import (FACE, POINT, BarrierParams, ContactInfeasible, ContactState, barrier,
                                   build_candidate_pairs, build_contact_state, contact_energy,
                                   contact_energy_grad_hess, contact_pressure_field, step_bounds,
                                   step_filter)

S = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])


def _state(slave, master, x, params):
    return build_contact_state(build_candidate_pairs(slave, master, params.radius, x), x, params)


def _fd(f, x, h, idx):
    g = np.zeros_like(x)
    for i in idx:
        for a in range(3):
            xp, xm = x.copy(), x.copy()
            xp[i, a] += h
            xm[i, a] -= h
            g[i, a] = (f(xp) - f(xm)) / (2 * h)
    return g


def test_inactive_is_zero():
    s, m, x = two_triangles(S, S + [0, 0, 0.002])
    st_ = _state(s, m, x, BarrierParams(eps_max=1e-3))
    E, g, H = contact_energy_grad_hess(st_, x)
    assert E == 0 and np.all(g == 0) and H.nnz == 0 or abs(H).max() == 0


def test_contact_gradient_fd_single_pair():
    s, m, x = two_triangles(S, S + [0.1, 0.05, 0.002])
    st_ = _state(s, m, x, BarrierParams(kappa=1e3, eps_max=1e-3))
    y = x.copy()
    y[3:, 2] -= 0.0015
    y[3:] += np.array([[1e-4, -2e-4, 5e-5], [0, 1e-4, -3e-5], [-1e-4, 0, 2e-5]])
    E, g, _ = contact_energy_grad_hess(st_, y)
    assert E > 0
    gfd = _fd(lambda z: contact_energy(st_, z), y, 1e-8, range(6))
    assert np.abs(gfd - g).max() <= 1e-5 * np.abs(g).max()


def test_contact_gradient_fd_random(rng):
    state, configs = _active_configs(rng, 50)
    nodes = np.unique(state.s_idx.ravel().tolist() + state.m_idx.ravel().tolist())
    for y in configs:
        _, g, _ = contact_energy_grad_hess(state, y)
        gfd = _fd(lambda z: contact_energy(state, z), y, 1e-8, nodes)
        assert np.abs(gfd - g).max() <= 1e-5 * np.abs(g).max()


def test_hessian_psd_dense(rng):
    state, configs = _active_configs(rng, 5, (1, 1, 1), (2, 1, 1))
    for y in configs:
        _, _, H = contact_energy_grad_hess(state, y)
        Hd = H.toarray()
        assert np.abs(Hd - Hd.T).max() <= 1e-12 * np.abs(Hd).max()
        lam = np.linalg.eigvalsh(0.5 * (Hd + Hd.T))
        assert lam.min() >= -1e-10 * np.linalg.norm(Hd, 2)


def test_infeasible_raises():
    s, m, x = two_triangles(S, S + [0, 0, 0.002])
    st_ = _state(s, m, x, BarrierParams(eps_max=1e-3))
    y = x.copy()
    y[3:, 2] = -1e-3
    with pytest.raises(ContactInfeasible):
        contact_energy(st_, y)


def _points_state(gaps):
    """Point samples of three master nodes above one slave triangle."""
    n = len(gaps)
    ref = np.vstack([S, np.column_stack([np.full(n, 0.2), np.full(n, 0.2), gaps])])
    z = np.zeros(n)
    return ContactState(np.full(n, POINT), np.zeros(n, np.int64), np.arange(n), np.tile([0, 1, 2], (n, 1)),
                        np.tile([0.6, 0.2, 0.2], (n, 1)), np.column_stack([3 + np.arange(n), [3] * n, [3] * n]),
                        np.tile([1.0, 0, 0], (n, 1)), z, np.ones(n), np.ones(n),
                        np.full(n, 1e-3), np.asarray(gaps, float), np.ones(n), ref), ref


def test_step_filter_single_sample():
    st_, x = _points_state([0.01])
    dx = np.zeros_like(x)
    dx[3, 2] = -0.02
    assert abs(step_filter(st_, x, dx) - 0.45) <= 1e-12


def test_step_filter_no_decrease():
    st_, x = _points_state([0.01, 0.02])
    dx = np.zeros_like(x)
    dx[3:, 2] = [0.5, 0.0]
    assert step_filter(st_, x, dx) == 1.0


def test_step_filter_min_over_samples():
    st_, x = _points_state([0.01, 0.01, 0.01])
    dx = np.zeros_like(x)
    dx[3:, 2] = [-0.02, -0.03, -0.0075]
    assert_allclose(step_bounds(st_, x, dx), [0.45, 0.3, 1.2], rtol=1e-12)
    assert abs(step_filter(st_, x, dx) - 0.3) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e-2, 1e-2), min_size=9, max_size=9))
def test_step_filter_keeps_linearised_gaps(vals):
    st_, x = _points_state([0.01, 0.004, 0.02])
    dx = np.zeros_like(x)
    dx[3:] = np.reshape(vals, (3, 3))
    a = step_filter(st_, x, dx)
    assert 0 < a <= 1
    g, rate = _kernels.backend.gap_rates(x, dx, *st_.kernel_args())
    assert np.all(g + a * rate >= 0.1 * g - 1e-15)


def test_pressure_field_values():
    eps_max = 1e-3
    s, m, x = two_triangles(S, S + [0, 0, 0.002])
    params = BarrierParams(kappa=3e5, eps_max=eps_max)
    st_ = _state(s, m, x, params)
    pf = contact_pressure_field(st_, x)
    assert np.all(pf["pressure"] == 0)
    y = x.copy()
    y[3:, 2] = eps_max / 2
    pf = contact_pressure_field(st_, y)
    face = st_.select(st_.stype == FACE)
    expect = 3e5 * face.gamma * -barrier(eps_max / 2, eps_max)[1]
    assert_allclose(pf["gap"], eps_max / 2, rtol=1e-12)
    assert_allclose(pf["pressure"], expect, rtol=1e-12)


def test_backends_agree(rng):
    if "compiled" not in _kernels.available_backends():
        pytest.skip("compiled kernels not built")
    py, cc = _kernels.get_backend("python"), _kernels.get_backend("compiled")
    state, configs = _active_configs(rng, 3)
    for y in configs:
        a = py.assemble(y, *state.kernel_args(), state.coef, state.eps, True)
        b = cc.assemble(y, *state.kernel_args(), state.coef, state.eps, True)
        assert_allclose(a[0], b[0], rtol=1e-12)
        assert_allclose(a[2], b[2], rtol=1e-11, atol=1e-12 * np.abs(a[2]).max())
        n = len(y)
        Ha = sp.coo_matrix((a[5], (a[3], a[4])), shape=(3 * n, 3 * n)).toarray()
        Hb = sp.coo_matrix((b[5], (b[3], b[4])), shape=(3 * n, 3 * n)).toarray()
        assert_allclose(Ha, Hb, rtol=1e-11, atol=1e-12 * np.abs(Ha).max())
        assert_allclose(py.gaps(y, *state.kernel_args()), cc.gaps(y, *state.kernel_args()), rtol=1e-13, atol=1e-15)
    slave, master, x, _ = stacked_interface()
    S3 = x[slave.vertex_map][slave.triangles]
    M3 = x[master.vertex_map][master.triangles]
    from mortarcontact.contact import triangle_rule
    qb, qw = triangle_rule(2)
    i = np.repeat(np.arange(len(S3)), len(M3))
    j = np.tile(np.arange(len(M3)), len(S3))
    ra = py.clip_faces(S3[i], M3[j], qb, qw)
    rb = cc.clip_faces(S3[i], M3[j], qb, qw)
    for u, v in zip(ra, rb):
        assert_allclose(u, v, rtol=1e-12, atol=1e-14)


def test_backend_selection():
    assert "python" in _kernels.available_backends()
    assert _kernels.get_backend("python").__name__.endswith("_pykernels")
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")
