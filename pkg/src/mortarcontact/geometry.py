"""Mesh containers and the geometric predicates shared by every other module.

Positions are stored as ``(n, 3)`` float64 arrays and connectivity as integer
arrays, so most routines here are thin, vectorised numpy code.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "TetMesh",
    "SurfaceMesh",
    "Aabb",
    "TriangleBVH",
    "tet_signed_volumes",
    "make_block",
    "extract_boundary_surface",
    "triangle_normal",
    "triangle_areas",
    "solve_barycentric_gram",
    "closest_point_on_triangle",
    "area_eps",
]


class GeometryError(ValueError):
    """Raised for malformed or degenerate geometry."""


def tet_signed_volumes(vertices, tets):
    """Signed volume of every tetrahedron (positive for right-handed order)."""
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(tets, dtype=np.int64)
    a = v[t[:, 1]] - v[t[:, 0]]
    b = v[t[:, 2]] - v[t[:, 0]]
    c = v[t[:, 3]] - v[t[:, 0]]
    return np.einsum("ij,ij->i", np.cross(a, b), c) / 6.0


@dataclass
class TetMesh:
    """Volumetric linear tetrahedral mesh.

    ``rest_vertices`` is captured at construction and never mutated; the
    solver works on copies of ``vertices``.
    """

    vertices: np.ndarray
    tets: np.ndarray
    rest_vertices: np.ndarray = field(default=None)

    def __post_init__(self):
        self.vertices = np.array(self.vertices, dtype=float).reshape(-1, 3)
        self.tets = np.array(self.tets, dtype=np.int64).reshape(-1, 4)
        if self.rest_vertices is None:
            self.rest_vertices = self.vertices.copy()
        else:
            self.rest_vertices = np.array(self.rest_vertices, dtype=float).reshape(-1, 3)
        self._validate()

    def _validate(self):
        n = len(self.vertices)
        for e, tet in enumerate(self.tets):
            if tet.min() < 0 or tet.max() >= n:
                raise GeometryError(f"element {e} references vertex outside [0, {n})")
            if len(set(tet.tolist())) != 4:
                raise GeometryError(f"element {e} repeats a vertex index")
        vol = tet_signed_volumes(self.rest_vertices, self.tets)
        scale = max(self.bbox_diagonal(), 1e-300) ** 3
        bad = np.flatnonzero(np.abs(vol) <= 1e-14 * scale)
        if bad.size:
            raise GeometryError(f"element {int(bad[0])} has zero volume")
        flip = vol < 0
        if flip.any():
            # swapping two indices reverses orientation
            self.tets[flip] = self.tets[flip][:, [0, 2, 1, 3]]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def volumes(self, positions=None) -> np.ndarray:
        x = self.rest_vertices if positions is None else positions
        return tet_signed_volumes(x, self.tets)

    def bbox_diagonal(self) -> float:
        if len(self.rest_vertices) == 0:
            return 0.0
        return float(np.linalg.norm(self.rest_vertices.max(0) - self.rest_vertices.min(0)))


@dataclass
class SurfaceMesh:
    """Oriented triangle surface.

    ``vertex_map`` maps local surface vertex ids to ids in a parent volume
    mesh (or ``None`` for free-standing surfaces such as visual meshes).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_map: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.array(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.vertex_map is not None:
            self.vertex_map = np.asarray(self.vertex_map, dtype=np.int64)
        self._edges = None

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges ``(i, j)`` with ``i < j``, sorted."""
        if self._edges is None:
            t = self.triangles
            e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            e.sort(axis=1)
            self._edges = np.unique(e, axis=0) if len(e) else np.zeros((0, 2), np.int64)
        return self._edges

    def normals(self, positions=None) -> np.ndarray:
        x = self.vertices if positions is None else positions
        tri = x[self.triangles]
        c = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return c / np.linalg.norm(c, axis=1)[:, None]

    def areas(self, positions=None) -> np.ndarray:
        x = self.vertices if positions is None else positions
        return triangle_areas(x[self.triangles])

    def global_triangles(self) -> np.ndarray:
        """Triangles expressed in parent-volume vertex ids."""
        if self.vertex_map is None:
            return self.triangles
        return self.vertex_map[self.triangles]

    def subset(self, tri_ids) -> "SurfaceMesh":
        """Surface made of the listed triangles, compacting unused vertices."""
        tri_ids = np.asarray(tri_ids, dtype=np.int64)
        tris = self.triangles[tri_ids]
        used, inverse = np.unique(tris, return_inverse=True)
        vmap = used if self.vertex_map is None else self.vertex_map[used]
        return SurfaceMesh(self.vertices[used], inverse.reshape(-1, 3), vmap)


@dataclass
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=float)
        self.max = np.asarray(self.max, dtype=float)
        if np.any(self.min > self.max):
            raise GeometryError("Aabb min must not exceed max")

    @classmethod
    def of_points(cls, pts) -> "Aabb":
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        return cls(pts.min(0), pts.max(0))

    def inflate(self, r: float) -> "Aabb":
        return Aabb(self.min - r, self.max + r)

    def overlaps(self, other: "Aabb") -> bool:
        return bool(np.all(self.min <= other.max) and np.all(other.min <= self.max))

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.all((pts >= self.min) & (pts <= self.max), axis=-1)

    def distance(self, p) -> float:
        d = np.maximum(np.maximum(self.min - p, p - self.max), 0.0)
        return float(np.sqrt(d @ d))


def make_block(size: Sequence[float], divisions: Sequence[int],
               origin: Sequence[float] = (0.0, 0.0, 0.0)) -> TetMesh:
    """Structured box mesh, each hexahedral cell split into six tets.

    Vertices are ordered with x fastest, then y, then z.
    """
    divisions = [int(d) for d in divisions]
    if len(divisions) != 3 or min(divisions) < 1:
        raise GeometryError(f"divisions must be three integers >= 1, got {divisions}")
    axes = [np.linspace(o, o + s, d + 1) for o, s, d in zip(origin, size, divisions)]
    return _hex_grid_to_tets(*np.meshgrid(*axes, indexing="ij"))


# six tets sharing the 0-6 diagonal of a hex with corners numbered by bits (i, j, k)
_HEX_TETS = np.array([
    [0, 1, 3, 7], [0, 3, 2, 7], [0, 2, 6, 7],
    [0, 6, 4, 7], [0, 4, 5, 7], [0, 5, 1, 7],
])


def _hex_grid_to_tets(X, Y, Z) -> TetMesh:
    """Tetrahedralise a logically structured grid given node coordinates.

    ``X, Y, Z`` are arrays of shape ``(nx+1, ny+1, nz+1)``. The diagonal split
    keeps faces conforming between neighbouring cells.
    """
    nx, ny, nz = (s - 1 for s in X.shape)
    # x fastest
    pts = np.stack([X.transpose(2, 1, 0).ravel(), Y.transpose(2, 1, 0).ravel(),
                    Z.transpose(2, 1, 0).ravel()], axis=1)

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    i, j, k = (a.transpose(2, 1, 0).ravel() for a in (i, j, k))
    corners = np.stack([vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))
                        for c in range(8)], axis=1)
    tets = corners[:, _HEX_TETS].reshape(-1, 4)
    return TetMesh(pts, tets)


_TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])


def extract_boundary_surface(mesh: TetMesh) -> SurfaceMesh:
    """Faces used by exactly one tet, oriented outward.

    The returned surface keeps its own compact vertex array with
    ``vertex_map`` pointing back into ``mesh``.
    """
    t = mesh.tets
    faces = t[:, _TET_FACES].reshape(-1, 3)
    owner = np.repeat(np.arange(len(t)), 4)
    key = np.sort(faces, axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        bad = uniq[np.flatnonzero(counts > 2)[0]]
        raise GeometryError(f"non-manifold face {tuple(bad.tolist())} shared by more than two tets")
    boundary = counts[inverse] == 1
    bfaces = faces[boundary]
    bowner = owner[boundary]
    # _TET_FACES is outward for positively oriented tets; enforce anyway
    x = mesh.rest_vertices
    tri = x[bfaces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    outward = tri.mean(1) - x[t[bowner]].mean(1)
    flip = np.einsum("ij,ij->i", n, outward) < 0
    bfaces[flip] = bfaces[flip][:, [0, 2, 1]]
    used, local = np.unique(bfaces, return_inverse=True)
    return SurfaceMesh(mesh.vertices[used], local.reshape(-1, 3), used)


def triangle_areas(tri) -> np.ndarray:
    tri = np.asarray(tri, dtype=float)
    c = np.cross(tri[..., 1, :] - tri[..., 0, :], tri[..., 2, :] - tri[..., 0, :])
    return 0.5 * np.linalg.norm(c, axis=-1)


def area_eps(tri) -> float:
    """Degeneracy threshold for a triangle, relative to its bounding box."""
    tri = np.asarray(tri, dtype=float)
    diag = np.linalg.norm(tri.max(0) - tri.min(0))
    return 1e-12 * diag * diag


def triangle_normal(tri) -> np.ndarray:
    tri = np.asarray(tri, dtype=float)
    c = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    nc = np.linalg.norm(c)
    if 0.5 * nc <= area_eps(tri):
        raise GeometryError("degenerate triangle has no normal")
    return c / nc


def solve_barycentric_gram(d, e1, e2):
    """Solve the 2x2 Gram system for the in-plane coefficients ``(v, w)``.

    ``d = v*e1 + w*e2 + offset*n``; the normal component drops out because
    it is orthogonal to both edges.
    """
    d, e1, e2 = (np.asarray(a, dtype=float) for a in (d, e1, e2))
    a11 = e1 @ e1
    a12 = e1 @ e2
    a22 = e2 @ e2
    det = a11 * a22 - a12 * a12
    if det <= 1e-14 * a11 * a22:
        raise GeometryError("near-singular Gram matrix (degenerate triangle)")
    b1 = d @ e1
    b2 = d @ e2
    v = (a22 * b1 - a12 * b2) / det
    w = (a11 * b2 - a12 * b1) / det
    return v, w


def closest_point_on_triangle(p, tri):
    """Closest point on a closed triangle.

    Returns ``(bary, q, delta)`` where ``q = bary @ tri`` and ``delta`` is the
    signed offset of ``p`` from the triangle's plane.
    """
    p = np.asarray(p, dtype=float)
    tri = np.asarray(tri, dtype=float)
    a, b, c = tri
    n = triangle_normal(tri)
    delta = float((p - a) @ n)
    bary = _closest_bary(p, a, b, c)
    return bary, bary @ tri, delta


def _closest_bary(p, a, b, c):
    # Voronoi-region walk: vertex regions, edge regions, then face interior
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = ab @ ap
    d2 = ac @ ap
    if d1 <= 0 and d2 <= 0:
        return np.array([1.0, 0.0, 0.0])
    bp = p - b
    d3 = ab @ bp
    d4 = ac @ bp
    if d3 >= 0 and d4 <= d3:
        return np.array([0.0, 1.0, 0.0])
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        return np.array([1.0 - v, v, 0.0])
    cp = p - c
    d5 = ab @ cp
    d6 = ac @ cp
    if d6 >= 0 and d5 <= d6:
        return np.array([0.0, 0.0, 1.0])
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        return np.array([1.0 - w, 0.0, w])
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return np.array([0.0, 1.0 - w, w])
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return np.array([1.0 - v - w, v, w])


class TriangleBVH:
    """Axis-aligned bounding-volume hierarchy over a triangle soup.

    Used for nearest-triangle queries. Ties are resolved toward the lowest
    triangle index so results do not depend on traversal order.
    """

    leaf_size = 4

    def __init__(self, tri_points):
        self.tri = np.asarray(tri_points, dtype=float)
        lo = self.tri.min(axis=1)
        hi = self.tri.max(axis=1)
        cen = 0.5 * (lo + hi)
        self._lo, self._hi = [], []
        self._children = []  # (left, right) or None
        self._items = []
        self._build(np.arange(len(self.tri)), lo, hi, cen)
        self._lo = np.array(self._lo)
        self._hi = np.array(self._hi)
        diag = np.linalg.norm(lo.min(0) - hi.max(0)) if len(lo) else 1.0
        self.tie_tol = 1e-12 * diag

    def _build(self, ids, lo, hi, cen) -> int:
        node = len(self._children)
        self._lo.append(lo[ids].min(0))
        self._hi.append(hi[ids].max(0))
        self._children.append(None)
        self._items.append(None)
        if len(ids) <= self.leaf_size:
            self._items[node] = ids
            return node
        c = cen[ids]
        axis = int(np.argmax(c.max(0) - c.min(0)))
        order = ids[np.argsort(c[:, axis], kind="stable")]
        half = len(order) // 2
        left = self._build(order[:half], lo, hi, cen)
        right = self._build(order[half:], lo, hi, cen)
        self._children[node] = (left, right)
        return node

    def _box_dist(self, node, p):
        d = np.maximum(np.maximum(self._lo[node] - p, p - self._hi[node]), 0.0)
        return float(np.sqrt(d @ d))

    def nearest(self, p):
        """Return ``(triangle id, distance)`` of the nearest triangle to ``p``."""
        p = np.asarray(p, dtype=float)
        best_id, best_d = -1, np.inf
        stack = [0]
        while stack:
            node = stack.pop()
            if self._box_dist(node, p) > best_d + self.tie_tol:
                continue
            items = self._items[node]
            if items is not None:
                for t in items:
                    bary = _closest_bary(p, *self.tri[t])
                    d = float(np.linalg.norm(p - bary @ self.tri[t]))
                    if d < best_d - self.tie_tol:
                        best_id, best_d = int(t), d
                    elif d <= best_d + self.tie_tol and t < best_id:
                        best_id, best_d = int(t), min(d, best_d)
                continue
            left, right = self._children[node]
            dl = self._box_dist(left, p)
            dr = self._box_dist(right, p)
            # visit the nearer child first
            if dl <= dr:
                stack.extend((right, left))
            else:
                stack.extend((left, right))
        return best_id, best_d
