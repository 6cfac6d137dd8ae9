"""Barrier function, smooth feature weights and the adaptive support radius."""
import numpy as np

__all__ = ["ContactInfeasible", "barrier", "hermite_step", "hermite_step_deriv",
           "feature_weight", "adaptive_eps", "FACE", "EDGE", "POINT"]

FACE, EDGE, POINT = 2, 1, 0


class ContactInfeasible(RuntimeError):
    """A contact gap became non-positive."""

    def __init__(self, msg, sample=None):
        super().__init__(msg)
        self.sample = sample


def barrier(g, eps):
    """IPC log barrier ``-(g - eps)^2 log(g / eps)`` and its first two derivatives.

    Zero (with zero derivatives) for ``g >= eps``.
    """
    if not g > 0:
        raise ContactInfeasible(f"barrier evaluated at non-positive gap {g!r}")
    if g >= eps:
        return 0.0, 0.0, 0.0
    d = g - eps
    lg = np.log(g / eps)
    return (-d * d * lg,
            -2 * d * lg - d * d / g,
            -2 * lg - 4 * d / g + d * d / (g * g))


def hermite_step(x, delta):
    """C1 smoothstep from 0 (``x <= 0``) to 1 (``x >= delta``)."""
    t = np.clip(np.asarray(x, dtype=float) / delta, 0.0, 1.0)
    return t * t * (3 - 2 * t)


def hermite_step_deriv(x, delta):
    x = np.asarray(x, dtype=float)
    t = x / delta
    inside = (t > 0) & (t < 1)
    return np.where(inside, 6 * t * (1 - t) / delta, 0.0)


def feature_weight(sample_type, delta_T, delta_e, master_bary=None, eta=None):
    """Master-feature weight: fades face samples near master-triangle edges
    and edge samples near master-edge endpoints; point samples keep weight 1."""
    if sample_type == FACE:
        return float(hermite_step(np.min(master_bary), delta_T))
    if sample_type == EDGE:
        return float(hermite_step(eta, delta_e) * hermite_step(1.0 - eta, delta_e))
    if sample_type == POINT:
        return 1.0
    raise ValueError(f"unknown sample type {sample_type!r}")


def adaptive_eps(g_ref, eps_max):
    """Per-sample support radius; keeps the reference gap strictly outside it."""
    g_ref = np.asarray(g_ref, dtype=float)
    if np.any(g_ref <= 0):
        raise ContactInfeasible("support radius requested for a non-positive reference gap")
    out = np.minimum(0.9 * g_ref, eps_max)
    return float(out) if out.ndim == 0 else out
