# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, fabs, fmax, fmin

cnp.import_array()

NAME = "compiled"


cdef inline double cross2(double ax, double ay, double bx, double by) nogil:
    return ax * by - ay * bx


cdef inline void frame(const double[:, :, :] T, Py_ssize_t p, double* s0, double* t1,
                       double* t2, double* n) noexcept nogil:
    cdef double e1[3]
    cdef double e2[3]
    cdef double c[3]
    cdef double ln, le
    cdef int d
    for d in range(3):
        s0[d] = T[p, 0, d]
        e1[d] = T[p, 1, d] - T[p, 0, d]
        e2[d] = T[p, 2, d] - T[p, 0, d]
    c[0] = e1[1] * e2[2] - e1[2] * e2[1]
    c[1] = e1[2] * e2[0] - e1[0] * e2[2]
    c[2] = e1[0] * e2[1] - e1[1] * e2[0]
    ln = sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
    le = sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2])
    for d in range(3):
        n[d] = c[d] / ln
        t1[d] = e1[d] / le
    t2[0] = n[1] * t1[2] - n[2] * t1[1]
    t2[1] = n[2] * t1[0] - n[0] * t1[2]
    t2[2] = n[0] * t1[1] - n[1] * t1[0]


cdef inline void to2d(double px, double py, double pz, double* s0, double* t1, double* t2,
                      double* out) noexcept nogil:
    cdef double dx = px - s0[0], dy = py - s0[1], dz = pz - s0[2]
    out[0] = dx * t1[0] + dy * t1[1] + dz * t1[2]
    out[1] = dx * t2[0] + dy * t2[1] + dz * t2[2]


cdef inline void bary2(double px, double py, double* tri, double* out) noexcept nogil:
    # tri holds (ax, ay, bx, by, cx, cy)
    cdef double den = cross2(tri[2] - tri[0], tri[3] - tri[1], tri[4] - tri[0], tri[5] - tri[1])
    cdef double lb = cross2(px - tri[0], py - tri[1], tri[4] - tri[0], tri[5] - tri[1]) / den
    cdef double lc = cross2(tri[2] - tri[0], tri[3] - tri[1], px - tri[0], py - tri[1]) / den
    out[0] = 1.0 - lb - lc
    out[1] = lb
    out[2] = lc


cdef inline double tri_lbar(double* s) noexcept nogil:
    return (sqrt((s[2] - s[0]) ** 2 + (s[3] - s[1]) ** 2)
            + sqrt((s[4] - s[2]) ** 2 + (s[5] - s[3]) ** 2)
            + sqrt((s[0] - s[4]) ** 2 + (s[1] - s[5]) ** 2)) / 3.0


cdef int clip_tri(double* subj, int ns, double* clip, double* out) noexcept nogil:
    """Sutherland-Hodgman; polygons are flat (x, y) arrays, capacity 16 vertices."""
    cdef double buf[32]
    cdef double* src
    cdef double* dst
    cdef int i, k, m, nout
    cdef double ax, ay, abx, aby, px, py, dp, cx, cy, dc, s
    for k in range(2 * ns):
        buf[k] = subj[k]
    src = buf
    dst = out
    m = ns
    for i in range(3):
        if m == 0:
            break
        ax = clip[2 * i]
        ay = clip[2 * i + 1]
        abx = clip[(2 * i + 2) % 6] - ax
        aby = clip[(2 * i + 3) % 6] - ay
        nout = 0
        px = src[2 * (m - 1)]
        py = src[2 * (m - 1) + 1]
        dp = cross2(abx, aby, px - ax, py - ay)
        for k in range(m):
            cx = src[2 * k]
            cy = src[2 * k + 1]
            dc = cross2(abx, aby, cx - ax, cy - ay)
            if dc >= 0:
                if dp < 0:
                    s = dp / (dp - dc)
                    dst[2 * nout] = px + (cx - px) * s
                    dst[2 * nout + 1] = py + (cy - py) * s
                    nout += 1
                dst[2 * nout] = cx
                dst[2 * nout + 1] = cy
                nout += 1
            elif dp >= 0:
                s = dp / (dp - dc)
                dst[2 * nout] = px + (cx - px) * s
                dst[2 * nout + 1] = py + (cy - py) * s
                nout += 1
            px = cx
            py = cy
            dp = dc
        m = nout
        # swap buffers
        if dst == out:
            dst = buf
            src = out
        else:
            dst = out
            src = buf
    if src != out:
        for k in range(2 * m):
            out[k] = src[k]
    return m


def clip_faces(const double[:, :, :] S, const double[:, :, :] M, const double[:, :] qbary,
               const double[:] qweight):
    cdef Py_ssize_t P = S.shape[0], p
    cdef int Q = qweight.shape[0], q, k, m, a, nclean
    cdef Py_ssize_t cap = P * 4 * Q, nk = 0
    pair_np = np.empty(cap, dtype=np.int64)
    sb_np = np.empty((cap, 3))
    mb_np = np.empty((cap, 3))
    w_np = np.empty(cap)
    cdef cnp.int64_t[:] pair = pair_np
    cdef double[:, :] sb = sb_np
    cdef double[:, :] mb = mb_np
    cdef double[:] w = w_np
    cdef double s0[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double n[3]
    cdef double s2d[6]
    cdef double m2d[6]
    cdef double poly[32]
    cdef double clean[32]
    cdef double lbar, mden, tol, area, sub, px, py, dx, dy
    cdef double bs[3]
    cdef double bm[3]
    with nogil:
        for p in range(P):
            frame(S, p, s0, t1, t2, n)
            for a in range(3):
                to2d(S[p, a, 0], S[p, a, 1], S[p, a, 2], s0, t1, t2, &s2d[2 * a])
                to2d(M[p, a, 0], M[p, a, 1], M[p, a, 2], s0, t1, t2, &m2d[2 * a])
            lbar = tri_lbar(s2d)
            mden = cross2(m2d[2] - m2d[0], m2d[3] - m2d[1], m2d[4] - m2d[0], m2d[5] - m2d[1])
            if fabs(mden) <= 1e-14 * lbar * lbar:
                continue
            m = clip_tri(m2d, 3, s2d, poly)
            tol = 1e-12 * lbar
            nclean = 0
            for k in range(m):
                if nclean > 0:
                    dx = poly[2 * k] - clean[2 * nclean - 2]
                    dy = poly[2 * k + 1] - clean[2 * nclean - 1]
                    if sqrt(dx * dx + dy * dy) <= tol:
                        continue
                clean[2 * nclean] = poly[2 * k]
                clean[2 * nclean + 1] = poly[2 * k + 1]
                nclean += 1
            while nclean > 1:
                dx = clean[0] - clean[2 * nclean - 2]
                dy = clean[1] - clean[2 * nclean - 1]
                if sqrt(dx * dx + dy * dy) > tol:
                    break
                nclean -= 1
            if nclean < 3:
                continue
            area = 0.0
            for k in range(1, nclean - 1):
                area += 0.5 * cross2(clean[2 * k] - clean[0], clean[2 * k + 1] - clean[1],
                                     clean[2 * k + 2] - clean[0], clean[2 * k + 3] - clean[1])
            if fabs(area) < 1e-14 * lbar * lbar:
                continue
            for k in range(1, nclean - 1):
                sub = fabs(0.5 * cross2(clean[2 * k] - clean[0], clean[2 * k + 1] - clean[1],
                                        clean[2 * k + 2] - clean[0], clean[2 * k + 3] - clean[1]))
                if sub == 0.0:
                    continue
                for q in range(Q):
                    px = qbary[q, 0] * clean[0] + qbary[q, 1] * clean[2 * k] + qbary[q, 2] * clean[2 * k + 2]
                    py = qbary[q, 0] * clean[1] + qbary[q, 1] * clean[2 * k + 1] + qbary[q, 2] * clean[2 * k + 3]
                    bary2(px, py, s2d, bs)
                    bary2(px, py, m2d, bm)
                    pair[nk] = p
                    for a in range(3):
                        sb[nk, a] = bs[a]
                        mb[nk, a] = bm[a]
                    w[nk] = qweight[q] * sub
                    nk += 1
    return pair_np[:nk], sb_np[:nk], mb_np[:nk], w_np[:nk]


def clip_edges(const double[:, :, :] S, const double[:, :, :] E, const double[:] gpts,
               const double[:] gwts):
    cdef Py_ssize_t P = S.shape[0], p
    cdef int Q = gwts.shape[0], q, i, a, on_edge
    cdef Py_ssize_t cap = P * Q, nk = 0
    pair_np = np.empty(cap, dtype=np.int64)
    sb_np = np.empty((cap, 3))
    eta_np = np.empty(cap)
    w_np = np.empty(cap)
    oe_np = np.empty(cap, dtype=np.int64)
    cdef cnp.int64_t[:] pair = pair_np
    cdef double[:, :] sb = sb_np
    cdef double[:] etas = eta_np
    cdef double[:] w = w_np
    cdef cnp.int64_t[:] oe = oe_np
    cdef double s0[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double n[3]
    cdef double s2d[6]
    cdef double e2d[4]
    cdef double bs[3]
    cdef double lbar, tol, ta, tb, ax, ay, abx, aby, f0, f1, tc, L3, eta, px, py, dx, dy, dz
    cdef bint empty
    with nogil:
        for p in range(P):
            frame(S, p, s0, t1, t2, n)
            for a in range(3):
                to2d(S[p, a, 0], S[p, a, 1], S[p, a, 2], s0, t1, t2, &s2d[2 * a])
            for a in range(2):
                to2d(E[p, a, 0], E[p, a, 1], E[p, a, 2], s0, t1, t2, &e2d[2 * a])
            lbar = tri_lbar(s2d)
            if sqrt((e2d[2] - e2d[0]) ** 2 + (e2d[3] - e2d[1]) ** 2) <= 1e-12 * lbar:
                continue
            tol = 1e-12 * lbar * lbar
            ta = 0.0
            tb = 1.0
            on_edge = -1
            empty = False
            for i in range(3):
                ax = s2d[2 * i]
                ay = s2d[2 * i + 1]
                abx = s2d[(2 * i + 2) % 6] - ax
                aby = s2d[(2 * i + 3) % 6] - ay
                f0 = cross2(abx, aby, e2d[0] - ax, e2d[1] - ay)
                f1 = cross2(abx, aby, e2d[2] - ax, e2d[3] - ay)
                if fabs(f0) <= tol and fabs(f1) <= tol:
                    on_edge = i
                    continue
                if f0 >= -tol and f1 >= -tol:
                    continue
                if f0 < -tol and f1 < -tol:
                    empty = True
                    break
                tc = f0 / (f0 - f1)
                if f0 < -tol:
                    ta = fmax(ta, tc)
                else:
                    tb = fmin(tb, tc)
            if empty or tb - ta <= 1e-12:
                continue
            dx = E[p, 1, 0] - E[p, 0, 0]
            dy = E[p, 1, 1] - E[p, 0, 1]
            dz = E[p, 1, 2] - E[p, 0, 2]
            L3 = (tb - ta) * sqrt(dx * dx + dy * dy + dz * dz)
            for q in range(Q):
                eta = ta + (tb - ta) * gpts[q]
                px = e2d[0] + eta * (e2d[2] - e2d[0])
                py = e2d[1] + eta * (e2d[3] - e2d[1])
                bary2(px, py, s2d, bs)
                pair[nk] = p
                for a in range(3):
                    sb[nk, a] = bs[a]
                etas[nk] = eta
                w[nk] = gwts[q] * L3
                oe[nk] = on_edge
                nk += 1
    return pair_np[:nk], sb_np[:nk], eta_np[:nk], w_np[:nk], oe_np[:nk]


def project_points(const double[:, :, :] S, const double[:, :] V):
    cdef Py_ssize_t P = S.shape[0], p
    bary_np = np.empty((P, 3))
    inside_np = np.empty(P, dtype=np.uint8)
    cdef double[:, :] bary = bary_np
    cdef cnp.uint8_t[:] inside = inside_np
    cdef double s0[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double n[3]
    cdef double s2d[6]
    cdef double v2d[2]
    cdef double bs[3]
    cdef int a
    with nogil:
        for p in range(P):
            frame(S, p, s0, t1, t2, n)
            for a in range(3):
                to2d(S[p, a, 0], S[p, a, 1], S[p, a, 2], s0, t1, t2, &s2d[2 * a])
            to2d(V[p, 0], V[p, 1], V[p, 2], s0, t1, t2, v2d)
            bary2(v2d[0], v2d[1], s2d, bs)
            for a in range(3):
                bary[p, a] = bs[a]
            inside[p] = bs[0] >= -1e-12 and bs[1] >= -1e-12 and bs[2] >= -1e-12
    return bary_np, inside_np.astype(bool)


# ---------------------------------------------------------------- assembly

cdef inline double sample_geometry(const double[:, :] x, const cnp.int64_t[:, :] s_idx,
                                   const double[:, :] s_bary, const cnp.int64_t[:, :] m_idx,
                                   const double[:, :] m_coef, Py_ssize_t k,
                                   double* dg) noexcept nogil:
    """Gap of sample k; fills dg (18 entries) when dg is not NULL."""
    cdef double S[3][3]
    cdef double e1[3]
    cdef double e2[3]
    cdef double c[3]
    cdef double n[3]
    cdef double r[3]
    cdef double t[3]
    cdef double d1[3]
    cdef double d2[3]
    cdef double A2, g
    cdef int a, d
    cdef Py_ssize_t v
    for a in range(3):
        v = s_idx[k, a]
        for d in range(3):
            S[a][d] = x[v, d]
    for d in range(3):
        e1[d] = S[1][d] - S[0][d]
        e2[d] = S[2][d] - S[0][d]
        r[d] = -(s_bary[k, 0] * S[0][d] + s_bary[k, 1] * S[1][d] + s_bary[k, 2] * S[2][d])
    for a in range(3):
        v = m_idx[k, a]
        for d in range(3):
            r[d] += m_coef[k, a] * x[v, d]
    c[0] = e1[1] * e2[2] - e1[2] * e2[1]
    c[1] = e1[2] * e2[0] - e1[0] * e2[2]
    c[2] = e1[0] * e2[1] - e1[1] * e2[0]
    A2 = sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
    for d in range(3):
        n[d] = c[d] / A2
    g = n[0] * r[0] + n[1] * r[1] + n[2] * r[2]
    if dg == NULL:
        return g
    for d in range(3):
        t[d] = (r[d] - n[d] * g) / A2
    d1[0] = e2[1] * t[2] - e2[2] * t[1]
    d1[1] = e2[2] * t[0] - e2[0] * t[2]
    d1[2] = e2[0] * t[1] - e2[1] * t[0]
    d2[0] = t[1] * e1[2] - t[2] * e1[1]
    d2[1] = t[2] * e1[0] - t[0] * e1[2]
    d2[2] = t[0] * e1[1] - t[1] * e1[0]
    for d in range(3):
        dg[d] = -d1[d] - d2[d] - s_bary[k, 0] * n[d]
        dg[3 + d] = d1[d] - s_bary[k, 1] * n[d]
        dg[6 + d] = d2[d] - s_bary[k, 2] * n[d]
        for a in range(3):
            dg[9 + 3 * a + d] = m_coef[k, a] * n[d]
    return g


def gaps(const double[:, :] x, const cnp.int64_t[:, :] s_idx, const double[:, :] s_bary,
         const cnp.int64_t[:, :] m_idx, const double[:, :] m_coef):
    cdef Py_ssize_t K = s_idx.shape[0], k
    out_np = np.empty(K)
    cdef double[:] out = out_np
    with nogil:
        for k in range(K):
            out[k] = sample_geometry(x, s_idx, s_bary, m_idx, m_coef, k, NULL)
    return out_np


def gap_gradients(const double[:, :] x, const cnp.int64_t[:, :] s_idx, const double[:, :] s_bary,
                  const cnp.int64_t[:, :] m_idx, const double[:, :] m_coef):
    cdef Py_ssize_t K = s_idx.shape[0], k
    g_np = np.empty(K)
    dg_np = np.empty((K, 6, 3))
    cdef double[:] g = g_np
    cdef double[:, :, :] dgv = dg_np
    cdef double dg[18]
    cdef int j
    with nogil:
        for k in range(K):
            g[k] = sample_geometry(x, s_idx, s_bary, m_idx, m_coef, k, dg)
            for j in range(18):
                dgv[k, j // 3, j % 3] = dg[j]
    return g_np, dg_np


def gap_rates(const double[:, :] x, const double[:, :] dx, const cnp.int64_t[:, :] s_idx,
              const double[:, :] s_bary, const cnp.int64_t[:, :] m_idx, const double[:, :] m_coef):
    cdef Py_ssize_t K = s_idx.shape[0], k, v
    g_np = np.empty(K)
    rate_np = np.empty(K)
    cdef double[:] g = g_np
    cdef double[:] rate = rate_np
    cdef double dg[18]
    cdef double acc
    cdef int a, d
    with nogil:
        for k in range(K):
            g[k] = sample_geometry(x, s_idx, s_bary, m_idx, m_coef, k, dg)
            acc = 0.0
            for a in range(6):
                v = s_idx[k, a] if a < 3 else m_idx[k, a - 3]
                for d in range(3):
                    acc = acc + dg[3 * a + d] * dx[v, d]
            rate[k] = acc
    return g_np, rate_np


cdef inline void barrier3(double g, double eps, double* B, double* dB, double* d2B) noexcept nogil:
    cdef double d, lg
    if g >= eps:
        B[0] = 0.0
        dB[0] = 0.0
        d2B[0] = 0.0
        return
    d = g - eps
    lg = log(g / eps)
    B[0] = -d * d * lg
    dB[0] = -2 * d * lg - d * d / g
    d2B[0] = -2 * lg - 4 * d / g + d * d / (g * g)


def barrier_terms(g, eps):
    g = np.ascontiguousarray(g, dtype=float)
    eps_b = np.ascontiguousarray(np.broadcast_to(np.asarray(eps, dtype=float), g.shape))
    B_np = np.empty_like(g)
    dB_np = np.empty_like(g)
    d2B_np = np.empty_like(g)
    cdef const double[:] gv = g.ravel()
    cdef const double[:] ev = eps_b.ravel()
    cdef double[:] Bv = B_np.reshape(-1)
    cdef double[:] dBv = dB_np.reshape(-1)
    cdef double[:] d2Bv = d2B_np.reshape(-1)
    cdef Py_ssize_t i
    with nogil:
        for i in range(gv.shape[0]):
            barrier3(gv[i], ev[i], &Bv[i], &dBv[i], &d2Bv[i])
    return B_np, dB_np, d2B_np


def energy(const double[:, :] x, const cnp.int64_t[:, :] s_idx, const double[:, :] s_bary,
           const cnp.int64_t[:, :] m_idx, const double[:, :] m_coef, const double[:] coef,
           const double[:] eps):
    cdef Py_ssize_t K = s_idx.shape[0], k
    e_np = np.empty(K)
    g_np = np.empty(K)
    cdef double[:] e = e_np
    cdef double[:] g = g_np
    cdef double B, dB, d2B
    cdef bint bad = False
    with nogil:
        for k in range(K):
            g[k] = sample_geometry(x, s_idx, s_bary, m_idx, m_coef, k, NULL)
            if g[k] <= 0:
                bad = True
                continue
            barrier3(g[k], eps[k], &B, &dB, &d2B)
            e[k] = coef[k] * B
    if bad:
        return None, g_np
    return e_np, g_np


def assemble(const double[:, :] x, const cnp.int64_t[:, :] s_idx, const double[:, :] s_bary,
             const cnp.int64_t[:, :] m_idx, const double[:, :] m_coef, const double[:] coef,
             const double[:] eps, bint want_hess=True):
    cdef Py_ssize_t K = s_idx.shape[0], k, v, nact = 0, pos
    cdef Py_ssize_t n_nodes = x.shape[0]
    g_np = np.empty(K)
    grad_np = np.zeros((n_nodes, 3))
    cdef double[:] g = g_np
    cdef double[:, :] grad = grad_np
    cdef double dg[18]
    cdef long dof[18]
    cdef double B, dB, d2B, E = 0.0, h
    cdef int a, d, i, j
    cdef bint bad = False
    with nogil:
        for k in range(K):
            g[k] = sample_geometry(x, s_idx, s_bary, m_idx, m_coef, k, NULL)
            if g[k] <= 0:
                bad = True
            elif g[k] < eps[k]:
                nact += 1
    empty = np.zeros(0, np.int64)
    if bad:
        return None, g_np, grad_np, empty, empty, np.zeros(0)
    cap = nact * 324 if want_hess else 0
    rows_np = np.empty(cap, dtype=np.int64)
    cols_np = np.empty(cap, dtype=np.int64)
    vals_np = np.empty(cap)
    cdef cnp.int64_t[:] rows = rows_np
    cdef cnp.int64_t[:] cols = cols_np
    cdef double[:] vals = vals_np
    pos = 0
    with nogil:
        for k in range(K):
            if g[k] >= eps[k]:
                continue
            sample_geometry(x, s_idx, s_bary, m_idx, m_coef, k, dg)
            barrier3(g[k], eps[k], &B, &dB, &d2B)
            E += coef[k] * B
            for a in range(6):
                v = s_idx[k, a] if a < 3 else m_idx[k, a - 3]
                for d in range(3):
                    grad[v, d] += coef[k] * dB * dg[3 * a + d]
                    dof[3 * a + d] = 3 * v + d
            if want_hess:
                h = coef[k] * fmax(d2B, 0.0)
                for i in range(18):
                    for j in range(18):
                        rows[pos] = dof[i]
                        cols[pos] = dof[j]
                        vals[pos] = h * dg[i] * dg[j]
                        pos += 1
    return E, g_np, grad_np, rows_np, cols_np, vals_np
