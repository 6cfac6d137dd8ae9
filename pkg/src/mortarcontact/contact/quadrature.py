"""Quadrature rules on the reference triangle and segment (weights sum to 1)."""
from functools import lru_cache

import numpy as np

__all__ = ["triangle_rule", "segment_rule"]


def _orbit3(a, w):
    b = 1 - 2 * a
    return [(b, a, a), (a, b, a), (a, a, b)], [w] * 3


def _orbit6(a, b, w):
    c = 1 - a - b
    pts = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
    return pts, [w] * 6


@lru_cache(maxsize=None)
def triangle_rule(order):
    """Symmetric rule exact for polynomials of degree ``order`` (1-4).

    All weights are positive, which the barrier needs.
    """
    if order == 1:
        pts, wts = [(1 / 3, 1 / 3, 1 / 3)], [1.0]
    elif order == 2:
        pts, wts = _orbit3(1 / 6, 1 / 3)
    elif order == 3:
        # Strang-Fix six-point rule
        pts, wts = _orbit6(0.659027622374092, 0.231933368553031, 1 / 6)
    elif order == 4:
        p1, w1 = _orbit3(0.445948490915965, 0.223381589678011)
        p2, w2 = _orbit3(0.091576213509771, 0.109951743655322)
        pts, wts = p1 + p2, w1 + w2
    else:
        raise ValueError(f"triangle quadrature order must be 1-4, got {order}")
    pts = np.array(pts, dtype=float)
    wts = np.array(wts, dtype=float)
    return pts, wts / wts.sum()


@lru_cache(maxsize=None)
def segment_rule(order):
    """Gauss-Legendre points on [0, 1]; ``order`` points."""
    if order < 1:
        raise ValueError("segment quadrature order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w
