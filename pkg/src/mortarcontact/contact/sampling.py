"""Broadphase, face/edge/point samplers and frozen contact states.

All contact arrays index a single global node array ``x``; the slave and
master :class:`~mortarcontact.geometry.SurfaceMesh` objects carry a
``vertex_map`` into it (surfaces without one are taken to use ``x`` ids
directly).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
from scipy.spatial import cKDTree

from .. import _kernels
from ..geometry import GeometryError, SurfaceMesh, area_eps
from .barrier import EDGE, FACE, POINT, ContactInfeasible, adaptive_eps, hermite_step
from .quadrature import segment_rule, triangle_rule

log = logging.getLogger(__name__)

__all__ = [
    "BarrierParams",
    "ContactSample",
    "ContactPairSet",
    "ContactState",
    "build_candidate_pairs",
    "sample_face",
    "sample_edge",
    "sample_point",
    "build_contact_state",
    "edge_kappa_compensation",
]

KappaSpec = Union[float, str]


@dataclass(frozen=True)
class BarrierParams:
    """Barrier stiffnesses, support radius and sampling controls.

    ``kappa_edge`` and ``kappa_point`` accept a number or a rule name:

    ``"compensate"``
        per-feature stiffness that hands the face weight removed by the
        transition bands to the edge and point samples, so the three sample
        types together integrate the interface area once.
    ``"mean-edge"``
        ``kappa * lbar`` and ``kappa * lbar**2`` with ``lbar`` the mean slave
        edge length.
    """

    kappa: float = 1e6
    eps_max: float = 1e-3
    kappa_edge: KappaSpec = "compensate"
    kappa_point: KappaSpec = "compensate"
    delta_T: float = 0.1
    delta_e: float = 0.1
    detection_radius: Optional[float] = None
    quad_order_face: int = 2
    quad_order_edge: int = 2

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.eps_max > 0:
            raise ValueError("eps_max must be positive")
        if not 0 < self.delta_T <= 1 / 3:
            raise ValueError("delta_T must lie in (0, 1/3]")
        if not 0 < self.delta_e <= 0.5:
            raise ValueError("delta_e must lie in (0, 0.5]")
        if self.detection_radius is not None and not self.detection_radius > 0:
            raise ValueError("detection_radius must be positive")
        for name in ("kappa_edge", "kappa_point"):
            v = getattr(self, name)
            if isinstance(v, str):
                if v not in ("compensate", "mean-edge"):
                    raise ValueError(f"{name} must be a number, 'compensate' or 'mean-edge'")
            elif not v >= 0:
                raise ValueError(f"{name} must be non-negative")
        triangle_rule(self.quad_order_face)
        segment_rule(self.quad_order_edge)

    @property
    def radius(self) -> float:
        """Broadphase distance (defaults to four support radii)."""
        return 4.0 * self.eps_max if self.detection_radius is None else self.detection_radius


@dataclass
class ContactSample:
    """One sample, as a readable record (states store samples as arrays)."""

    sample_type: int
    slave_tri: int
    slave_bary: np.ndarray
    master_feature: int
    master_bary: np.ndarray
    w: float
    gamma: float
    eps: float
    g_ref: float
    kappa: float
    eta: Optional[float] = None
    gap: Optional[float] = None


def _global_ids(surface: SurfaceMesh) -> np.ndarray:
    if surface.vertex_map is None:
        return np.arange(len(surface.vertices))
    return surface.vertex_map


def _positions(surface: SurfaceMesh, positions):
    """Surface-local vertex positions, from the global array if given."""
    if positions is None:
        return surface.vertices
    return np.asarray(positions, dtype=float)[_global_ids(surface)]


@dataclass
class ContactPairSet:
    """Slave/master surfaces and their broadphase candidates.

    Pairs are ``(slave triangle, feature)`` rows in surface-local ids, one
    array per master feature kind (triangles, edges, vertices).
    """

    slave: SurfaceMesh
    master: SurfaceMesh
    face_pairs: np.ndarray
    edge_pairs: np.ndarray
    point_pairs: np.ndarray
    radius: float

    @property
    def n_pairs(self) -> int:
        return len(self.face_pairs) + len(self.edge_pairs) + len(self.point_pairs)


def _boxes(pts, cells):
    P = pts[cells]
    return P.min(axis=1), P.max(axis=1)


def _overlap_pairs(lo_s, hi_s, lo_f, hi_f, r):
    """All (i, j) with slave box i (inflated by r) overlapping feature box j."""
    if len(lo_s) == 0 or len(lo_f) == 0:
        return np.zeros((0, 2), np.int64)
    cs, hs = 0.5 * (lo_s + hi_s), 0.5 * (hi_s - lo_s)
    cf, hf = 0.5 * (lo_f + hi_f), 0.5 * (hi_f - lo_f)
    # overlapping boxes have centres closer than this bound
    reach = np.linalg.norm(hs, axis=1) + np.sqrt(3.0) * r + np.linalg.norm(hf, axis=1).max()
    tree = cKDTree(cf)
    hits = tree.query_ball_point(cs, reach * (1 + 1e-12) + 1e-300)
    counts = np.array([len(h) for h in hits])
    if counts.sum() == 0:
        return np.zeros((0, 2), np.int64)
    i = np.repeat(np.arange(len(cs)), counts)
    j = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits if h])
    keep = np.all(lo_s[i] - r <= hi_f[j], axis=1) & np.all(lo_f[j] <= hi_s[i] + r, axis=1)
    out = np.stack([i[keep], j[keep]], axis=1)
    return out[np.lexsort((out[:, 1], out[:, 0]))]


def build_candidate_pairs(slave: SurfaceMesh, master: SurfaceMesh, detection_radius: float,
                          positions=None) -> ContactPairSet:
    """Broadphase: every slave triangle / master feature pair whose bounding
    boxes, with the slave box inflated by ``detection_radius``, overlap."""
    if not detection_radius > 0:
        raise ValueError("detection radius must be positive")
    if slave is master or np.intersect1d(_global_ids(slave), _global_ids(master)).size:
        raise GeometryError("slave and master surfaces must be distinct (self-contact is unsupported)")
    xs = _positions(slave, positions)
    xm = _positions(master, positions)
    lo_s, hi_s = _boxes(xs, slave.triangles)
    r = float(detection_radius)
    faces = _overlap_pairs(lo_s, hi_s, *_boxes(xm, master.triangles), r)
    edges = _overlap_pairs(lo_s, hi_s, *_boxes(xm, master.edges), r)
    verts = _overlap_pairs(lo_s, hi_s, xm, xm, r)
    return ContactPairSet(slave, master, faces, edges, verts, r)


# ------------------------------------------------------------ single samplers


def _check_slave(S):
    S = np.asarray(S, dtype=float).reshape(3, 3)
    c = np.cross(S[1] - S[0], S[2] - S[0])
    if 0.5 * np.linalg.norm(c) <= area_eps(S):
        raise GeometryError("degenerate slave triangle")
    return S, c / np.linalg.norm(c)


def _local_gaps(S, xm, s_bary):
    _, n = _check_slave(S)
    xs = s_bary @ S
    return (xm - xs) @ n


def _eps_or_nan(g, eps_max):
    return float(adaptive_eps(g, eps_max)) if g > 0 else float("nan")


def sample_face(slave_tri, master_tri, params: BarrierParams, slave_id=0, master_id=0) -> List[ContactSample]:
    """Mortar samples of one slave/master triangle pair.

    The master triangle is projected on the slave tangent plane and clipped
    by the slave triangle; the overlap is fan-triangulated and integrated
    with the ``quad_order_face`` rule. Gaps use the unprojected 3D points.
    """
    S, _ = _check_slave(slave_tri)
    M = np.asarray(master_tri, dtype=float).reshape(3, 3)
    qb, qw = triangle_rule(params.quad_order_face)
    pair, sb, mb, w = _kernels.backend.clip_faces(S[None], M[None], qb, qw)
    g = _local_gaps(S, mb @ M, sb)
    return [ContactSample(FACE, slave_id, sb[k], master_id, mb[k], float(w[k]),
                          float(hermite_step(mb[k].min(), params.delta_T)),
                          _eps_or_nan(g[k], params.eps_max), float(g[k]), params.kappa,
                          gap=float(g[k]))
            for k in range(len(w))]


def sample_edge(slave_tri, master_edge, params: BarrierParams, slave_id=0, master_id=0,
                kappa_edge: Optional[float] = None) -> List[ContactSample]:
    """Gauss samples on the part of a master edge projecting inside the slave triangle."""
    S, _ = _check_slave(slave_tri)
    E = np.asarray(master_edge, dtype=float).reshape(2, 3)
    if np.linalg.norm(E[1] - E[0]) == 0:
        raise GeometryError("master edge has zero length")
    gp, gw = segment_rule(params.quad_order_edge)
    pair, sb, eta, w, _ = _kernels.backend.clip_edges(S[None], E[None], gp, gw)
    xm = (1 - eta)[:, None] * E[0] + eta[:, None] * E[1]
    g = _local_gaps(S, xm, sb)
    de = params.delta_e
    kap = params.kappa if kappa_edge is None else kappa_edge
    return [ContactSample(EDGE, slave_id, sb[k], master_id, np.array([1 - eta[k], eta[k]]),
                          float(w[k]), float(hermite_step(eta[k], de) * hermite_step(1 - eta[k], de)),
                          _eps_or_nan(g[k], params.eps_max), float(g[k]), kap,
                          eta=float(eta[k]), gap=float(g[k]))
            for k in range(len(w))]


def sample_point(slave_tri, master_vertex, params: BarrierParams, slave_id=0, master_id=0,
                 kappa_point: Optional[float] = None) -> Optional[ContactSample]:
    """Point sample if the vertex projects into the closed slave triangle."""
    S, _ = _check_slave(slave_tri)
    V = np.asarray(master_vertex, dtype=float).reshape(1, 3)
    bary, inside = _kernels.backend.project_points(S[None], V)
    if not inside[0]:
        return None
    g = float(_local_gaps(S, V, bary)[0])
    kap = params.kappa if kappa_point is None else kappa_point
    return ContactSample(POINT, slave_id, bary[0], master_id, np.ones(1), 1.0, 1.0,
                         _eps_or_nan(g, params.eps_max), g, kap, gap=g)


# ------------------------------------------------------------ frozen state


@dataclass
class ContactState:
    """Frozen contact samples stored as parallel arrays.

    ``s_idx``/``m_idx`` hold global node ids, ``s_bary``/``m_coef`` the
    matching interpolation weights; master slots that a sample type does
    not use carry coefficient 0. ``coef`` is the per-sample barrier
    multiplier ``kappa * w * gamma``.
    """

    stype: np.ndarray
    slave_tri: np.ndarray
    feature: np.ndarray
    s_idx: np.ndarray
    s_bary: np.ndarray
    m_idx: np.ndarray
    m_coef: np.ndarray
    eta: np.ndarray
    w: np.ndarray
    gamma: np.ndarray
    eps: np.ndarray
    g_ref: np.ndarray
    kappa: np.ndarray
    reference_positions: np.ndarray
    n_rejected: int = 0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coef = self.kappa * self.w * self.gamma

    def __len__(self):
        return len(self.stype)

    @classmethod
    def empty(cls, reference_positions):
        z = np.zeros(0)
        zi = np.zeros(0, np.int64)
        return cls(zi, zi, zi, np.zeros((0, 3), np.int64), np.zeros((0, 3)), np.zeros((0, 3), np.int64),
                   np.zeros((0, 3)), z, z, z, z, z, z, np.asarray(reference_positions, dtype=float).copy())

    def select(self, mask) -> "ContactState":
        m = np.asarray(mask)
        return ContactState(self.stype[m], self.slave_tri[m], self.feature[m], self.s_idx[m],
                            self.s_bary[m], self.m_idx[m], self.m_coef[m], self.eta[m], self.w[m],
                            self.gamma[m], self.eps[m], self.g_ref[m], self.kappa[m],
                            self.reference_positions, self.n_rejected, dict(self.info))

    def kernel_args(self):
        return self.s_idx, self.s_bary, self.m_idx, self.m_coef

    def gaps(self, x) -> np.ndarray:
        return _kernels.backend.gaps(np.asarray(x, dtype=float), *self.kernel_args())

    def sample(self, k, x=None) -> ContactSample:
        t = int(self.stype[k])
        mb = {FACE: self.m_coef[k], EDGE: self.m_coef[k, :2], POINT: self.m_coef[k, :1]}[t]
        gap = None if x is None else float(self.gaps(x)[k])
        return ContactSample(t, int(self.slave_tri[k]), self.s_bary[k].copy(), int(self.feature[k]),
                             mb.copy(), float(self.w[k]), float(self.gamma[k]), float(self.eps[k]),
                             float(self.g_ref[k]), float(self.kappa[k]),
                             eta=float(self.eta[k]) if t == EDGE else None, gap=gap)

    def samples(self, x=None) -> List[ContactSample]:
        return [self.sample(k, x) for k in range(len(self))]

    def counts(self) -> dict:
        return {name: int(np.sum(self.stype == t)) for name, t in (("face", FACE), ("edge", EDGE), ("point", POINT))}


def edge_kappa_compensation(face_feature, face_mbary, face_lost, edge_feature, edge_eta, edge_w,
                            edge_gamma, master_tris, master_edges, n_master_vertices, kappa):
    """Per-edge and per-vertex stiffnesses for the ``"compensate"`` rule.

    Each face sample gives up ``w * (1 - gamma)`` of weight; it is booked on
    the master-triangle edge opposite its smallest master barycentric. An
    edge's stiffness spreads the weight booked on it over its samples'
    total length; what the endpoint fade ``1 - gamma`` of those samples
    removes is booked on the nearer endpoint for the point samples. The three sample
    types then integrate the sampled interface area exactly once.

    Returns ``(kappa_edge, kappa_vertex, vertex_lost)`` indexed by master
    edge and master vertex; ``vertex_lost`` is the weight to be carried by a
    point sample of unit weight.
    """
    n_edges = len(master_edges)
    key_e = master_edges[:, 0] * (n_master_vertices + 1) + master_edges[:, 1]
    lost_e = np.zeros(n_edges)
    if len(face_feature):
        a = np.argmin(face_mbary, axis=1)
        tri = master_tris[face_feature]
        v0 = tri[np.arange(len(a)), (a + 1) % 3]
        v1 = tri[np.arange(len(a)), (a + 2) % 3]
        key = np.minimum(v0, v1) * (n_master_vertices + 1) + np.maximum(v0, v1)
        np.add.at(lost_e, np.searchsorted(key_e, key), face_lost)
    carried = np.bincount(edge_feature, weights=edge_w, minlength=n_edges)
    k_edge = np.where(carried > 0, kappa * lost_e / np.where(carried > 0, carried, 1.0), 0.0)
    vertex_lost = np.zeros(n_master_vertices)
    if len(edge_feature):
        kw = k_edge[edge_feature] * edge_w * (1 - edge_gamma)
        end = np.where(edge_eta < 0.5, master_edges[edge_feature, 0], master_edges[edge_feature, 1])
        np.add.at(vertex_lost, end, kw)
    return k_edge, vertex_lost


def _mean_slave_edge(slave: SurfaceMesh, x) -> float:
    e = slave.edges
    xs = _positions(slave, x)
    return float(np.mean(np.linalg.norm(xs[e[:, 1]] - xs[e[:, 0]], axis=1))) if len(e) else 0.0


def build_contact_state(pairs: ContactPairSet, reference_positions, params: BarrierParams,
                        gap_reference_positions=None, face_orientation_filter=True,
                        current_positions=None) -> ContactState:
    """Run all samplers over the candidate pairs and freeze the result.

    Sampling weights are computed from the geometry at ``reference_positions``.
    Support radii come from gaps at ``gap_reference_positions`` (defaults
    to the same positions); a sample whose gap there is not positive falls
    back to its gap at ``current_positions`` (default: the reference).
    Samples with a non-positive gap at ``current_positions`` are rejected
    with a warning.

    With ``face_orientation_filter`` master triangles whose normal does not
    oppose the slave normal produce no face samples.
    """
    kb = _kernels.backend
    x = np.asarray(reference_positions, dtype=float)
    x_gref = x if gap_reference_positions is None else np.asarray(gap_reference_positions, dtype=float)
    x_now = x if current_positions is None else np.asarray(current_positions, dtype=float)
    slave, master = pairs.slave, pairs.master
    sg = _global_ids(slave)
    mg = _global_ids(master)
    s_tris = sg[slave.triangles]
    m_tris = mg[master.triangles]
    m_edges = mg[master.edges]
    lbar = _mean_slave_edge(slave, x)
    blocks = []
    n_rejected = 0

    def add(block):
        nonlocal n_rejected
        s_idx = s_tris[block["slave_tri"]]
        g = kb.gaps(x_now, s_idx, block["s_bary"], block["m_idx"], block["m_coef"])
        ok = g > 0
        if x_now is not x:
            ok &= kb.gaps(x, s_idx, block["s_bary"], block["m_idx"], block["m_coef"]) > 0
        n_rejected += int(np.sum(~ok))
        block = {k: v[ok] for k, v in block.items()}
        blocks.append(block)
        return block

    # face samples
    fp = pairs.face_pairs
    if len(fp) and face_orientation_filter:
        ns = slave.normals(_positions(slave, x))[fp[:, 0]]
        nm = master.normals(_positions(master, x))[fp[:, 1]]
        fp = fp[np.einsum("kd,kd->k", ns, nm) < 0]
    faces = None
    if len(fp):
        qb, qw = triangle_rule(params.quad_order_face)
        pr, sb, mb, w = kb.clip_faces(x[s_tris[fp[:, 0]]], x[m_tris[fp[:, 1]]], qb, qw)
        st, ft = fp[pr, 0], fp[pr, 1]
        faces = add(dict(stype=np.full(len(pr), FACE), slave_tri=st, feature=ft, s_bary=sb,
                         m_idx=m_tris[ft], m_coef=mb, eta=np.zeros(len(pr)), w=w,
                         gamma=hermite_step(mb.min(axis=1), params.delta_T),
                         kappa=np.full(len(pr), params.kappa)))

    # edge samples
    ep = pairs.edge_pairs
    edges = None
    if len(ep) and params.kappa_edge != 0:
        gp, gw = segment_rule(params.quad_order_edge)
        pr, sb, eta, w, on_edge = kb.clip_edges(x[s_tris[ep[:, 0]]], x[m_edges[ep[:, 1]]], gp, gw)
        st, fe = ep[pr, 0], ep[pr, 1]
        keep = _dedup_on_edge(slave, st, on_edge)
        st, fe, sb, eta, w = st[keep], fe[keep], sb[keep], eta[keep], w[keep]
        m_idx = np.stack([m_edges[fe, 0], m_edges[fe, 1], m_edges[fe, 0]], axis=1)
        m_coef = np.stack([1 - eta, eta, np.zeros_like(eta)], axis=1)
        de = params.delta_e
        edges = add(dict(stype=np.full(len(st), EDGE), slave_tri=st, feature=fe, s_bary=sb,
                         m_idx=m_idx, m_coef=m_coef, eta=eta, w=w,
                         gamma=hermite_step(eta, de) * hermite_step(1 - eta, de),
                         kappa=np.zeros(len(st))))

    vertex_lost = None
    if edges is not None:
        if params.kappa_edge == "compensate":
            if faces is None:
                faces = dict(feature=np.zeros(0, np.int64), m_coef=np.zeros((0, 3)), w=np.zeros(0),
                             gamma=np.zeros(0))
            k_edge, vertex_lost = edge_kappa_compensation(
                faces["feature"], faces["m_coef"], faces["w"] * (1 - faces["gamma"]), edges["feature"],
                edges["eta"], edges["w"], edges["gamma"], master.triangles, master.edges,
                len(mg), params.kappa)
            edges["kappa"][:] = k_edge[edges["feature"]]
        elif params.kappa_edge == "mean-edge":
            edges["kappa"][:] = params.kappa * lbar
        else:
            edges["kappa"][:] = float(params.kappa_edge)

    # point samples
    vp = pairs.point_pairs
    if len(vp) and params.kappa_point != 0:
        bary, inside = kb.project_points(x[s_tris[vp[:, 0]]], x[mg[vp[:, 1]]])
        keep = _dedup_points(vp, bary, inside)
        st, fv = vp[keep, 0], vp[keep, 1]
        n = len(st)
        if params.kappa_point == "compensate":
            kv = np.zeros(n) if vertex_lost is None else vertex_lost[fv]
        elif params.kappa_point == "mean-edge":
            kv = np.full(n, params.kappa * lbar ** 2)
        else:
            kv = np.full(n, float(params.kappa_point))
        add(dict(stype=np.full(n, POINT), slave_tri=st, feature=fv, s_bary=bary[keep],
                 m_idx=np.repeat(mg[fv][:, None], 3, axis=1),
                 m_coef=np.tile([1.0, 0.0, 0.0], (n, 1)), eta=np.zeros(n), w=np.ones(n),
                 gamma=np.ones(n), kappa=kv))

    if n_rejected:
        log.warning("rejected %d contact samples with non-positive gap at sampling time", n_rejected)
    if not blocks:
        return ContactState.empty(x)
    cat = {k: np.concatenate([b[k] for b in blocks]) for k in blocks[0]}
    keep_idx = np.flatnonzero(cat["w"] * cat["gamma"] * cat["kappa"] > 0)
    cat = {k: v[keep_idx] for k, v in cat.items()}
    s_idx = s_tris[cat["slave_tri"]]
    g_ref = kb.gaps(x_gref, s_idx, cat["s_bary"], cat["m_idx"], cat["m_coef"])
    if x_gref is not x:
        g_ref = np.where(g_ref > 0, g_ref, kb.gaps(x_now, s_idx, cat["s_bary"], cat["m_idx"], cat["m_coef"]))
    state = ContactState(cat["stype"].astype(np.int64), cat["slave_tri"].astype(np.int64),
                         cat["feature"].astype(np.int64), s_idx, cat["s_bary"],
                         cat["m_idx"].astype(np.int64), cat["m_coef"], cat["eta"], cat["w"],
                         cat["gamma"], adaptive_eps(g_ref, params.eps_max) if len(g_ref) else g_ref,
                         g_ref, cat["kappa"], x.copy(), n_rejected)
    state.info["mean_slave_edge"] = lbar
    return state


def _slave_edge_neighbours(slave: SurfaceMesh):
    """``nb[t, i]``: slave triangle across local edge ``(i, i+1)`` of ``t`` or -1."""
    t = slave.triangles
    nt = len(t)
    nb = -np.ones((nt, 3), np.int64)
    a = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    b = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    tri = np.tile(np.arange(nt), 3)
    loc = np.repeat(np.arange(3), nt)
    order = np.lexsort((tri, hi, lo))
    lo, hi, tri, loc = lo[order], hi[order], tri[order], loc[order]
    same = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
    for k in np.flatnonzero(same):
        nb[tri[k], loc[k]] = tri[k + 1]
        nb[tri[k + 1], loc[k + 1]] = tri[k]
    return nb


def _dedup_on_edge(slave, st, on_edge):
    """Edge samples lying along a shared slave edge go to the lower-index triangle."""
    keep = np.ones(len(st), bool)
    flagged = np.flatnonzero(on_edge >= 0)
    if flagged.size:
        nb = _slave_edge_neighbours(slave)
        other = nb[st[flagged], on_edge[flagged]]
        keep[flagged] = (other < 0) | (st[flagged] < other)
    return keep


def _dedup_points(vp, bary, inside, tol=1e-12):
    """Accept interior projections; a vertex on a slave edge or corner goes
    to the lowest-index accepting slave triangle."""
    keep = inside.copy()
    boundary = inside & (bary.min(axis=1) <= tol)
    idx = np.flatnonzero(boundary)
    if idx.size:
        # pairs are sorted by slave triangle, so the first hit per vertex wins
        order = idx[np.lexsort((vp[idx, 0], vp[idx, 1]))]
        first = np.ones(len(order), bool)
        first[1:] = vp[order[1:], 1] != vp[order[:-1], 1]
        keep[order[~first]] = False
        # a vertex accepted in some interior keeps only that interior sample
        interior_v = np.unique(vp[inside & ~boundary, 1])
        keep[order[first][np.isin(vp[order[first], 1], interior_v)]] = False
    return keep
