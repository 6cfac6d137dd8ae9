"""Small-strain linear elasticity on linear tetrahedra.

Tensors use the six-component order ``(xx, yy, zz, xy, yz, xz)``; strains are
tensor (not engineering) shear components.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .geometry import GeometryError, SurfaceMesh, TetMesh, tet_signed_volumes

log = logging.getLogger(__name__)

__all__ = [
    "Material",
    "ElementOperator",
    "ElementOperators",
    "build_element_operators",
    "element_strain",
    "element_stress",
    "element_stresses",
    "nodal_stresses",
    "stiffness_matrix",
    "elastic_energy_grad_hess",
    "pressure_load_forces",
    "VOIGT",
]

VOIGT = ("xx", "yy", "zz", "xy", "yz", "xz")
_VI = np.array([0, 1, 2, 0, 1, 0])
_VJ = np.array([0, 1, 2, 1, 2, 2])


@dataclass(frozen=True)
class Material:
    E: float
    nu: float

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5 - 1e-6:
            raise ValueError(f"Poisson's ratio must lie in (-1, 0.5), got {self.nu}")

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))

    @property
    def mu(self) -> float:
        return self.E / (2 * (1 + self.nu))


@dataclass(frozen=True)
class ElementOperator:
    tet_id: int
    shape_gradients: np.ndarray
    rest_volume: float


class ElementOperators:
    """Per-element shape-function gradients for a whole mesh, stored as arrays."""

    def __init__(self, tets, grads, volumes):
        self.tets = tets
        self.grads = grads          # (ne, 4, 3)
        self.volumes = volumes      # (ne,)

    def __len__(self):
        return len(self.volumes)

    def __getitem__(self, e) -> ElementOperator:
        return ElementOperator(int(e), self.grads[e], float(self.volumes[e]))

    def __iter__(self):
        return (self[e] for e in range(len(self)))


def build_element_operators(mesh: TetMesh) -> ElementOperators:
    x = mesh.rest_vertices
    t = mesh.tets
    vol = tet_signed_volumes(x, t)
    bad = np.flatnonzero(vol <= 0)
    if bad.size:
        raise GeometryError(f"element {int(bad[0])} has non-positive volume")
    D = np.stack([x[t[:, 1]] - x[t[:, 0]], x[t[:, 2]] - x[t[:, 0]], x[t[:, 3]] - x[t[:, 0]]], axis=2)
    # rows of D^-1 are the gradients of shape functions 1..3
    Dinv = np.linalg.inv(D)
    g = np.empty((len(t), 4, 3))
    g[:, 1:] = Dinv
    g[:, 0] = -Dinv.sum(axis=1)
    return ElementOperators(t, g, vol)


def _voigt(T):
    return T[..., _VI, _VJ]


def element_strain(op: ElementOperator, u) -> np.ndarray:
    """Constant small strain of one element from its four nodal displacements."""
    u = np.asarray(u, dtype=float).reshape(4, 3)
    grad_u = u.T @ op.shape_gradients
    return _voigt(0.5 * (grad_u + grad_u.T))


def element_stress(mat: Material, eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    sig = 2 * mat.mu * eps
    sig[..., :3] += mat.lam * eps[..., :3].sum(axis=-1, keepdims=True)
    return sig


def _strains(ops: ElementOperators, u):
    ue = u[ops.tets]                       # (ne, 4, 3)
    grad_u = np.einsum("eai,eaj->eij", ue, ops.grads)
    return _voigt(0.5 * (grad_u + grad_u.transpose(0, 2, 1)))


def element_stresses(ops: ElementOperators, mat: Material, u) -> np.ndarray:
    """Cauchy stress of every element, shape ``(ne, 6)``."""
    return element_stress(mat, _strains(ops, np.asarray(u, dtype=float)))


def nodal_stresses(ops: ElementOperators, stresses, n_nodes) -> np.ndarray:
    """Volume-weighted average of incident element stresses."""
    acc = np.zeros((n_nodes, 6))
    wsum = np.zeros(n_nodes)
    for a in range(4):
        np.add.at(acc, ops.tets[:, a], stresses * ops.volumes[:, None])
        np.add.at(wsum, ops.tets[:, a], ops.volumes)
    return acc / np.maximum(wsum, 1e-300)[:, None]


def stiffness_matrix(ops: ElementOperators, mat: Material, n_nodes) -> sp.csr_matrix:
    """Assembled ``3n x 3n`` stiffness; exact symmetric by construction."""
    g = ops.grads
    V = ops.volumes
    gg = np.einsum("eak,ebk->eab", g, g)                     # g_a . g_b
    eye = np.eye(3)
    Ke = (mat.mu * (gg[:, :, None, :, None] * eye[None, None, :, None, :]
                    + np.einsum("eaj,ebi->eaibj", g, g))
          + mat.lam * np.einsum("eai,ebj->eaibj", g, g))
    Ke *= V[:, None, None, None, None]
    dof = (3 * ops.tets[:, :, None] + np.arange(3)).reshape(-1, 12)
    rows = np.repeat(dof, 12, axis=1).ravel()
    cols = np.tile(dof, (1, 12)).ravel()
    K = sp.coo_matrix((Ke.reshape(-1), (rows, cols)), shape=(3 * n_nodes,) * 2).tocsr()
    return ((K + K.T) * 0.5).tocsr()


def elastic_energy(ops: ElementOperators, mat: Material, u) -> float:
    eps = _strains(ops, u)
    ee = (eps[:, :3] ** 2).sum(1) + 2 * (eps[:, 3:] ** 2).sum(1)
    tr = eps[:, :3].sum(1)
    return float(np.sum(ops.volumes * (mat.mu * ee + 0.5 * mat.lam * tr * tr)))


def elastic_energy_grad_hess(ops: ElementOperators, mat: Material, x, rest, K=None):
    """Energy, gradient (``(n, 3)``) and constant Hessian of linear elasticity."""
    x = np.asarray(x, dtype=float)
    u = x - rest
    if K is None:
        K = stiffness_matrix(ops, mat, len(x))
    grad = (K @ u.ravel()).reshape(-1, 3)
    return elastic_energy(ops, mat, u), grad, K


def pressure_load_forces(surface: SurfaceMesh, face_set, magnitude: float,
                         direction: Union[str, Sequence[float]] = "inward-normal",
                         positions=None) -> np.ndarray:
    """Consistent nodal forces of a uniform pressure on linear triangles.

    Returns forces indexed by the surface's own vertex ids; use
    ``surface.vertex_map`` to scatter into a volume mesh.
    """
    x = surface.vertices if positions is None else positions
    f = np.zeros((len(x), 3))
    face_set = np.asarray(face_set, dtype=np.int64)
    if face_set.size == 0:
        log.warning("pressure load on an empty face set has no effect")
        return f
    tris = surface.triangles[face_set]
    areas = surface.areas(x)[face_set]
    if isinstance(direction, str):
        if direction != "inward-normal":
            raise ValueError(f"unknown load direction {direction!r}")
        dirs = -surface.normals(x)[face_set]
    else:
        d = np.asarray(direction, dtype=float)
        dirs = np.broadcast_to(d / np.linalg.norm(d), tris.shape)
    share = (magnitude * areas / 3.0)[:, None] * dirs
    for a in range(3):
        np.add.at(f, tris[:, a], share)
    return f
