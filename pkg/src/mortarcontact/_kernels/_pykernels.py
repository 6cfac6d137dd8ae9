"""Reference kernels in plain Python/numpy.

Each function here has a twin with the same signature in ``_ckernels.pyx``.
Sampling routines loop over candidate pairs in Python; assembly routines
are vectorised over samples.
"""
import numpy as np

NAME = "python"

# ---------------------------------------------------------------- sampling


def _frame(S):
    s0, s1, s2 = S
    e1 = s1 - s0
    e2 = s2 - s0
    c = np.cross(e1, e2)
    n = c / np.linalg.norm(c)
    t1 = e1 / np.linalg.norm(e1)
    t2 = np.cross(n, t1)
    return s0, t1, t2, n


def _to2d(P, s0, t1, t2):
    d = P - s0
    return np.stack([d @ t1, d @ t2], axis=-1)


def _cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _bary2(P, A, B, C):
    den = _cross2(B - A, C - A)
    lb = _cross2(P - A, C - A) / den
    lc = _cross2(B - A, P - A) / den
    return np.array([1.0 - lb - lc, lb, lc])


def clip_polygon(subject, clip):
    """Sutherland-Hodgman clip of ``subject`` by the convex CCW polygon ``clip``."""
    out = [np.asarray(p, dtype=float) for p in subject]
    m = len(clip)
    for i in range(m):
        if not out:
            break
        a = clip[i]
        b = clip[(i + 1) % m]
        ab = b - a
        src = out
        out = []
        prev = src[-1]
        dprev = _cross2(ab, prev - a)
        for cur in src:
            dcur = _cross2(ab, cur - a)
            if dcur >= 0:
                if dprev < 0:
                    out.append(prev + (cur - prev) * (dprev / (dprev - dcur)))
                out.append(cur)
            elif dprev >= 0:
                out.append(prev + (cur - prev) * (dprev / (dprev - dcur)))
            prev, dprev = cur, dcur
    return out


def _clean_polygon(poly, merge_tol):
    out = []
    for p in poly:
        if not out or np.hypot(*(p - out[-1])) > merge_tol:
            out.append(p)
    while len(out) > 1 and np.hypot(*(out[0] - out[-1])) <= merge_tol:
        out.pop()
    return out


def clip_faces(S, M, qbary, qweight):
    """Face-face overlap quadrature for candidate pairs.

    Parameters
    ----------
    S, M : (P, 3, 3) arrays
        Slave and master triangle vertex positions.
    qbary, qweight : arrays
        Triangle quadrature rule (barycentric points, weights summing to 1).

    Returns
    -------
    pair, s_bary, m_bary, w
        One row per quadrature sample; ``w`` is an area in the slave plane.
    """
    pairs, sb, mb, ws = [], [], [], []
    for p in range(len(S)):
        s0, t1, t2, n = _frame(S[p])
        s2d = _to2d(S[p], s0, t1, t2)
        m2d = _to2d(M[p], s0, t1, t2)
        lbar = (np.linalg.norm(s2d[1] - s2d[0]) + np.linalg.norm(s2d[2] - s2d[1])
                + np.linalg.norm(s2d[0] - s2d[2])) / 3.0
        mden = _cross2(m2d[1] - m2d[0], m2d[2] - m2d[0])
        if abs(mden) <= 1e-14 * lbar * lbar:
            continue
        poly = _clean_polygon(clip_polygon(list(m2d), s2d), 1e-12 * lbar)
        if len(poly) < 3:
            continue
        area = 0.0
        subs = []
        for k in range(1, len(poly) - 1):
            a = 0.5 * _cross2(poly[k] - poly[0], poly[k + 1] - poly[0])
            subs.append((poly[0], poly[k], poly[k + 1], abs(a)))
            area += a
        if abs(area) < 1e-14 * lbar * lbar:
            continue
        for A, B, C, a in subs:
            if a == 0.0:
                continue
            for q in range(len(qweight)):
                P = qbary[q, 0] * A + qbary[q, 1] * B + qbary[q, 2] * C
                pairs.append(p)
                sb.append(_bary2(P, s2d[0], s2d[1], s2d[2]))
                mb.append(_bary2(P, m2d[0], m2d[1], m2d[2]))
                ws.append(qweight[q] * a)
    return (np.array(pairs, dtype=np.int64), np.array(sb).reshape(-1, 3),
            np.array(mb).reshape(-1, 3), np.array(ws, dtype=float))


def clip_segment(P0, P1, tri2d, tol):
    """Parameter interval of segment ``P0-P1`` inside a CCW triangle.

    Returns ``(ta, tb, on_edge)`` or ``None``; ``on_edge`` is the local index
    of a triangle edge the whole interval lies on, else -1.
    """
    ta, tb = 0.0, 1.0
    on_edge = -1
    for i in range(3):
        a = tri2d[i]
        b = tri2d[(i + 1) % 3]
        ab = b - a
        f0 = _cross2(ab, P0 - a)
        f1 = _cross2(ab, P1 - a)
        if abs(f0) <= tol and abs(f1) <= tol:
            on_edge = i
            continue
        if f0 >= -tol and f1 >= -tol:
            continue
        if f0 < -tol and f1 < -tol:
            return None
        tc = f0 / (f0 - f1)
        if f0 < -tol:
            ta = max(ta, tc)
        else:
            tb = min(tb, tc)
    if tb - ta <= 1e-12:
        return None
    return ta, tb, on_edge


def clip_edges(S, E, gpts, gwts):
    """Edge-triangle clipping plus 1D Gauss quadrature on the clipped interval.

    Returns ``pair, s_bary, eta, w, on_edge`` per sample; ``w`` is a 3D
    length along the master edge.
    """
    pairs, sb, etas, ws, onedge = [], [], [], [], []
    for p in range(len(S)):
        s0, t1, t2, n = _frame(S[p])
        s2d = _to2d(S[p], s0, t1, t2)
        e2d = _to2d(E[p], s0, t1, t2)
        lbar = (np.linalg.norm(s2d[1] - s2d[0]) + np.linalg.norm(s2d[2] - s2d[1])
                + np.linalg.norm(s2d[0] - s2d[2])) / 3.0
        if np.linalg.norm(e2d[1] - e2d[0]) <= 1e-12 * lbar:
            continue
        res = clip_segment(e2d[0], e2d[1], s2d, 1e-12 * lbar * lbar)
        if res is None:
            continue
        ta, tb, oe = res
        L = (tb - ta) * np.linalg.norm(E[p, 1] - E[p, 0])
        for q in range(len(gwts)):
            eta = ta + (tb - ta) * gpts[q]
            P = e2d[0] + eta * (e2d[1] - e2d[0])
            pairs.append(p)
            sb.append(_bary2(P, s2d[0], s2d[1], s2d[2]))
            etas.append(eta)
            ws.append(gwts[q] * L)
            onedge.append(oe)
    return (np.array(pairs, dtype=np.int64), np.array(sb).reshape(-1, 3),
            np.array(etas, dtype=float), np.array(ws, dtype=float),
            np.array(onedge, dtype=np.int64))


def project_points(S, V):
    """Slave-plane barycentrics of each master vertex; ``(bary, inside)``."""
    bary = np.empty((len(S), 3))
    for p in range(len(S)):
        s0, t1, t2, n = _frame(S[p])
        s2d = _to2d(S[p], s0, t1, t2)
        v2d = _to2d(V[p], s0, t1, t2)
        bary[p] = _bary2(v2d, s2d[0], s2d[1], s2d[2])
    inside = bary.min(axis=1) >= -1e-12 if len(S) else np.zeros(0, bool)
    return bary, inside


# ---------------------------------------------------------------- assembly


def _geometry(x, s_idx, s_bary, m_idx, m_coef):
    S = x[s_idx]                                   # (K, 3, 3)
    xs = np.einsum("ka,kad->kd", s_bary, S)
    xm = np.einsum("ka,kad->kd", m_coef, x[m_idx])
    e1 = S[:, 1] - S[:, 0]
    e2 = S[:, 2] - S[:, 0]
    c = np.cross(e1, e2)
    A2 = np.sqrt(np.einsum("kd,kd->k", c, c))
    n = c / A2[:, None]
    r = xm - xs
    g = np.einsum("kd,kd->k", n, r)
    return e1, e2, A2, n, r, g


def gaps(x, s_idx, s_bary, m_idx, m_coef):
    return _geometry(x, s_idx, s_bary, m_idx, m_coef)[-1]


def gap_gradients(x, s_idx, s_bary, m_idx, m_coef):
    """Gaps and their gradients w.r.t. the six sample nodes, ``(K, 6, 3)``."""
    e1, e2, A2, n, r, g = _geometry(x, s_idx, s_bary, m_idx, m_coef)
    t = (r - n * g[:, None]) / A2[:, None]
    dg = np.empty((len(g), 6, 3))
    d1 = np.cross(e2, t)
    d2 = np.cross(t, e1)
    dg[:, 0] = -d1 - d2 - s_bary[:, 0, None] * n
    dg[:, 1] = d1 - s_bary[:, 1, None] * n
    dg[:, 2] = d2 - s_bary[:, 2, None] * n
    dg[:, 3:] = m_coef[:, :, None] * n[:, None, :]
    return g, dg


def gap_rates(x, dx, s_idx, s_bary, m_idx, m_coef):
    """Gaps and directional derivatives ``grad g . dx`` per sample."""
    g, dg = gap_gradients(x, s_idx, s_bary, m_idx, m_coef)
    nodes = np.concatenate([s_idx, m_idx], axis=1)
    return g, np.einsum("kad,kad->k", dg, dx[nodes])


def barrier_terms(g, eps):
    """IPC barrier value and first two derivatives w.r.t. the gap (vectorised)."""
    g = np.asarray(g, dtype=float)
    eps = np.broadcast_to(np.asarray(eps, dtype=float), g.shape)
    B = np.zeros_like(g)
    dB = np.zeros_like(g)
    d2B = np.zeros_like(g)
    act = g < eps
    ga, ea = g[act], eps[act]
    d = ga - ea
    lg = np.log(ga / ea)
    B[act] = -d * d * lg
    dB[act] = -2 * d * lg - d * d / ga
    d2B[act] = -2 * lg - 4 * d / ga + d * d / (ga * ga)
    return B, dB, d2B


def energy(x, s_idx, s_bary, m_idx, m_coef, coef, eps):
    """Per-sample weighted barrier energies and gaps."""
    g = gaps(x, s_idx, s_bary, m_idx, m_coef)
    if np.any(g <= 0):
        return None, g
    B, _, _ = barrier_terms(g, eps)
    return coef * B, g


def assemble(x, s_idx, s_bary, m_idx, m_coef, coef, eps, want_hess=True):
    """Weighted barrier energy, gradient and Gauss-Newton Hessian triplets.

    ``coef`` is the per-sample product kappa*w*gamma. Returns
    ``(energy, g, grad, rows, cols, vals)``; ``energy`` is ``None`` when a
    gap is non-positive (``g`` is still returned for diagnostics).
    """
    n_nodes = len(x)
    g, dg = gap_gradients(x, s_idx, s_bary, m_idx, m_coef)
    grad = np.zeros((n_nodes, 3))
    empty = np.zeros(0, np.int64)
    if np.any(g <= 0):
        return None, g, grad, empty, empty, np.zeros(0)
    B, dB, d2B = barrier_terms(g, eps)
    E = float(np.sum(coef * B))
    nodes = np.concatenate([s_idx, m_idx], axis=1)
    act = np.flatnonzero(g < eps)
    contrib = (coef * dB)[act, None, None] * dg[act]
    np.add.at(grad, nodes[act], contrib)
    if not want_hess or act.size == 0:
        return E, g, grad, empty, empty, np.zeros(0)
    J = dg[act].reshape(-1, 18)
    h = (coef * np.maximum(d2B, 0.0))[act]
    vals = h[:, None, None] * J[:, :, None] * J[:, None, :]
    dof = (3 * nodes[act][:, :, None] + np.arange(3)).reshape(-1, 18)
    rows = np.repeat(dof, 18, axis=1).ravel()
    cols = np.tile(dof, (1, 18)).ravel()
    return E, g, grad, rows, cols, vals.ravel()
