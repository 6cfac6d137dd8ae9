"""Parametric meshes for the Hertz benchmark: a quarter-cylinder block and a
one-eighth sphere, both built from graded structured hex grids, split six
tets per cell."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..geometry import TetMesh, _hex_grid_to_tets

__all__ = ["graded", "quarter_cylinder_block", "sphere_octant"]


def graded(n: int, strength: float) -> np.ndarray:
    """``n + 1`` points on [0, 1] clustered toward 0 (``strength`` 0 is uniform)."""
    s = np.linspace(0.0, 1.0, n + 1)
    if strength <= 0:
        return s
    return np.sinh(strength * s) / np.sinh(strength)


def quarter_cylinder_block(radius: float, height: float, divisions: Sequence[int] = (14, 14, 7),
                           grading: Sequence[float] = (5.5, 3.0)) -> TetMesh:
    """Quarter cylinder ``x, y >= 0``, ``r <= radius``, ``-height <= z <= 0``.

    The square-to-disk map ``x = u sqrt(1 - v^2/2)``, ``y = v sqrt(1 - u^2/2)``
    sends the unit square onto the quarter disk; cells cluster toward the
    axis (in-plane grading) and toward the top face ``z = 0``.
    """
    nu, nv, nz = (int(d) for d in divisions)
    u = graded(nu, grading[0])
    v = graded(nv, grading[0])
    t = graded(nz, grading[1])
    U, V, T = np.meshgrid(u, v, t, indexing="ij")
    X = radius * U * np.sqrt(1 - V ** 2 / 2)
    Y = radius * V * np.sqrt(1 - U ** 2 / 2)
    Z = -height * T
    return _hex_grid_to_tets(X, Y, Z)


def sphere_octant(radius: float, gap: float, divisions: Sequence[int] = (11, 11, 11),
                  grading: float = 4.5) -> TetMesh:
    """One-eighth ball ``x, y >= 0`` below its flat top, lowest point at ``z = gap``.

    A graded unit cube is mapped onto the ball octant by
    ``x' = x sqrt(1 - y^2/2 - z^2/2 + y^2 z^2/3)`` (and cyclic), with its
    ``(0, 0, 1)`` corner on the downward pole; the flat top is ``z = gap + radius``.
    """
    n1, n2, n3 = (int(d) for d in divisions)
    a = graded(n1, grading)
    b = graded(n2, grading)
    c = 1.0 - graded(n3, grading)[::-1]
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    xs = A * np.sqrt(1 - B ** 2 / 2 - C ** 2 / 2 + B ** 2 * C ** 2 / 3)
    ys = B * np.sqrt(1 - C ** 2 / 2 - A ** 2 / 2 + C ** 2 * A ** 2 / 3)
    zs = C * np.sqrt(1 - A ** 2 / 2 - B ** 2 / 2 + A ** 2 * B ** 2 / 3)
    zc = gap + radius
    return _hex_grid_to_tets(radius * xs, radius * ys, zc - radius * zs)
