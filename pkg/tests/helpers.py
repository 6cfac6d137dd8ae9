"""Shared builders for the contact tests."""
import numpy as np

from mortarcontact.contact import BarrierParams, build_candidate_pairs, build_contact_state
from mortarcontact.geometry import SurfaceMesh, extract_boundary_surface, make_block


def stacked_interface(div_bottom=(5, 5, 2), div_top=(4, 4, 2), gap=0.002):
    """Top face of a lower block (slave) facing the bottom face of an upper block (master)."""
    bottom = make_block((1, 1, 0.5), div_bottom)
    top = make_block((1, 1, 0.5), div_top, (0, 0, 0.5 + gap))
    sb, st = extract_boundary_surface(bottom), extract_boundary_surface(top)
    slave = sb.subset(np.flatnonzero(sb.normals()[:, 2] > 0.9))
    master = st.subset(np.flatnonzero(st.normals()[:, 2] < -0.9))
    master.vertex_map = master.vertex_map + bottom.n_vertices
    x = np.vstack([bottom.vertices, top.vertices])
    return slave, master, x, bottom.n_vertices


def two_triangles(slave_tri, master_tri):
    """One-triangle slave and master surfaces (master wound to face the slave)."""
    s = SurfaceMesh(np.asarray(slave_tri, float), [[0, 1, 2]], vertex_map=[0, 1, 2])
    m = SurfaceMesh(np.asarray(master_tri, float), [[0, 2, 1]], vertex_map=[3, 4, 5])
    return s, m, np.vstack([slave_tri, master_tri]).astype(float)


def random_triangle(rng, scale=1.0, min_area=0.05):
    while True:
        t = rng.uniform(-1, 1, size=(3, 3)) * scale
        t[:, 2] = 0
        cz = np.cross(t[1] - t[0], t[2] - t[0])[2]
        if 0.5 * abs(cz) > min_area * scale ** 2:
            # counter-clockwise, so the normal is +z
            return t if cz > 0 else t[[0, 2, 1]]


def point_in_triangle_2d(p, tri):
    a, b, c = tri[:, :2]
    d = b - a, c - a
    m = np.array([d[0], d[1]]).T
    lam = np.linalg.solve(m, (p[..., :2] - a).T).T
    return (lam[..., 0] >= 0) & (lam[..., 1] >= 0) & (lam.sum(-1) <= 1)


def active_configs(rng, n, div_bottom=(2, 2, 1), div_top=(3, 3, 1)):
    """Frozen states on a small stacked interface plus pushed, penetration-free positions."""
    params = BarrierParams(kappa=1e6, eps_max=1e-3)
    slave, master, x, nb = stacked_interface(div_bottom, div_top, gap=0.002)
    state = build_contact_state(build_candidate_pairs(slave, master, params.radius, x), x, params)
    nodes = np.unique(np.concatenate([slave.vertex_map, master.vertex_map]))
    out = []
    while len(out) < n:
        y = x.copy()
        y[master.vertex_map, 2] -= rng.uniform(0.0013, 0.0017)
        y[nodes] += rng.normal(scale=5e-5, size=(len(nodes), 3))
        g = state.gaps(y)
        if g.min() > 1e-4 and np.any(g < state.eps):
            out.append(y)
    return state, out
