"""Embed visual-mesh vertices on a simulation surface and replay its deformation.

Each visual vertex is attached to its nearest simulation triangle through
the plane barycentrics of its projection plus a signed offset along the
triangle normal. Replaying a deformed surface moves the vertex with the
interpolated triangle point and the deformed normal.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import GeometryError, SurfaceMesh, TriangleBVH, make_block, extract_boundary_surface

__all__ = [
    "Embedding",
    "precompute_embedding",
    "update_visual_positions",
    "nearest_triangles_brute_force",
    "refinement_study",
]


@dataclass(frozen=True)
class Embedding:
    """Per visual vertex: host triangle, plane barycentrics ``(u, v, w)`` and normal offset."""

    triangle: np.ndarray
    bary: np.ndarray
    delta: np.ndarray

    def __len__(self):
        return len(self.triangle)

    @property
    def u(self):
        return self.bary[:, 0]

    @property
    def v(self):
        return self.bary[:, 1]

    @property
    def w(self):
        return self.bary[:, 2]


def _frames(tri):
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    c = np.cross(e1, e2)
    nc = np.linalg.norm(c, axis=1)
    return e1, e2, c, nc


def _plane_coordinates(p, tri):
    """Unclamped plane barycentrics and signed offsets, vectorised Gram solve."""
    e1, e2, c, nc = _frames(tri)
    d = p - tri[:, 0]
    a11 = np.einsum("kd,kd->k", e1, e1)
    a12 = np.einsum("kd,kd->k", e1, e2)
    a22 = np.einsum("kd,kd->k", e2, e2)
    det = a11 * a22 - a12 * a12
    bad = np.flatnonzero(det <= 1e-14 * a11 * a22)
    if bad.size:
        raise GeometryError(f"degenerate triangle at visual vertex {int(bad[0])}")
    b1 = np.einsum("kd,kd->k", d, e1)
    b2 = np.einsum("kd,kd->k", d, e2)
    v = (a22 * b1 - a12 * b2) / det
    w = (a11 * b2 - a12 * b1) / det
    delta = np.einsum("kd,kd->k", d, c / nc[:, None])
    return np.stack([1.0 - v - w, v, w], axis=1), delta


def nearest_triangles_brute_force(points, tri_points) -> np.ndarray:
    """Reference nearest-triangle search (lowest index wins ties)."""
    from .geometry import _closest_bary
    points = np.asarray(points, dtype=float)
    tri_points = np.asarray(tri_points, dtype=float)
    diag = np.linalg.norm(tri_points.reshape(-1, 3).max(0) - tri_points.reshape(-1, 3).min(0))
    tol = 1e-12 * diag
    out = np.empty(len(points), np.int64)
    for i, p in enumerate(points):
        d = np.array([np.linalg.norm(p - _closest_bary(p, *t) @ t) for t in tri_points])
        out[i] = int(np.flatnonzero(d <= d.min() + tol)[0])
    return out


def precompute_embedding(vis_vertices, sim_surface: SurfaceMesh, positions=None,
                         brute_force: bool = False) -> Embedding:
    """Attach every visual vertex to its nearest simulation triangle.

    The clamped closest point only selects the host triangle; the stored
    barycentrics are those of the unclamped plane projection, so replaying
    the rest surface reproduces the visual vertices exactly.
    """
    p = np.asarray(vis_vertices, dtype=float).reshape(-1, 3)
    x = sim_surface.vertices if positions is None else np.asarray(positions, dtype=float)
    if len(sim_surface.triangles) == 0:
        raise GeometryError("simulation surface has no triangles")
    tri_pts = x[sim_surface.triangles]
    if brute_force:
        host = nearest_triangles_brute_force(p, tri_pts)
    else:
        bvh = TriangleBVH(tri_pts)
        host = np.array([bvh.nearest(q)[0] for q in p], dtype=np.int64)
    bary, delta = _plane_coordinates(p, tri_pts[host])
    return Embedding(host, bary, delta)


def update_visual_positions(embedding: Embedding, sim_positions, sim_surface: SurfaceMesh) -> np.ndarray:
    """Deformed visual vertices ``u v0' + v v1' + w v2' + delta n'``."""
    x = np.asarray(sim_positions, dtype=float)
    tri = x[sim_surface.triangles[embedding.triangle]]
    _, _, c, nc = _frames(tri)
    scale = np.linalg.norm(tri.max(axis=1) - tri.min(axis=1), axis=1)
    bad = np.flatnonzero(0.5 * nc <= 1e-12 * scale * scale)
    if bad.size:
        raise GeometryError(f"deformed triangle {int(embedding.triangle[bad[0]])} is degenerate")
    n = c / nc[:, None]
    return np.einsum("ka,kad->kd", embedding.bary, tri) + embedding.delta[:, None] * n


def _bending(p, amplitude):
    out = np.array(p, dtype=float, copy=True)
    out[:, 2] += amplitude * np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
    return out


def refinement_study(divisions=(4, 8, 16), amplitude=0.05, n_visual=400, seed=0):
    """Reconstruction error of a smooth bending field on refined flat surfaces.

    A unit square (top face of a thin block) is embedded with fixed visual
    points lying in its plane; each simulation surface is bent by
    ``z += amplitude * sin(pi x) sin(pi y)`` and the replayed visual points
    are compared with the same field evaluated at the points themselves.

    Returns ``(h, errors, ratios)`` where ``ratios[i] = errors[i] / errors[i+1]``.
    """
    rng = np.random.default_rng(seed)
    vis = np.column_stack([rng.uniform(0, 1, n_visual), rng.uniform(0, 1, n_visual), np.zeros(n_visual)])
    hs, errs = [], []
    for d in divisions:
        block = make_block((1.0, 1.0, 1.0), (d, d, 1), origin=(0.0, 0.0, -1.0))
        surf = extract_boundary_surface(block)
        top = surf.subset(np.flatnonzero(surf.normals()[:, 2] > 0.5))
        emb = precompute_embedding(vis, top)
        moved = update_visual_positions(emb, _bending(top.vertices, amplitude), top)
        errs.append(float(np.abs(moved - _bending(vis, amplitude)).max()))
        hs.append(1.0 / d)
    errs = np.array(errs)
    return np.array(hs), errs, errs[:-1] / errs[1:]
