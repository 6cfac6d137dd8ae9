"""Barrier potential over a frozen contact state, its derivatives and the
linearised-gap step bound."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from .barrier import EDGE, FACE, POINT, ContactInfeasible
from .sampling import ContactState

__all__ = [
    "contact_energy",
    "contact_energy_grad_hess",
    "step_filter",
    "step_bounds",
    "contact_pressure_field",
    "contact_normal_force",
    "nodal_contact_pressure",
]


def _raise_infeasible(g):
    k = int(np.argmin(g))
    raise ContactInfeasible(f"contact sample {k} has non-positive gap {g[k]!r}", sample=k)


def contact_energy(state: ContactState, x, per_sample=False):
    """Barrier energy (or per-sample energies) at positions ``x``."""
    x = np.asarray(x, dtype=float)
    if len(state) == 0:
        return np.zeros(0) if per_sample else 0.0
    e, g = _kernels.backend.energy(x, *state.kernel_args(), state.coef, state.eps)
    if e is None:
        _raise_infeasible(g)
    return e if per_sample else float(np.sum(e))


def contact_energy_grad_hess(state: ContactState, x, want_hess=True):
    """Potential, its gradient ``(n, 3)`` and the Gauss-Newton Hessian.

    The Hessian is a ``3n x 3n`` CSR matrix built from gap-gradient outer
    products with the barrier curvature clamped at zero, hence PSD.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if len(state) == 0:
        return 0.0, np.zeros((n, 3)), (sp.csr_matrix((3 * n, 3 * n)) if want_hess else None)
    E, g, grad, rows, cols, vals = _kernels.backend.assemble(
        x, *state.kernel_args(), state.coef, state.eps, want_hess)
    if E is None:
        _raise_infeasible(g)
    H = None
    if want_hess:
        H = sp.coo_matrix((vals, (rows, cols)), shape=(3 * n, 3 * n)).tocsr()
    return E, grad, H


def step_bounds(state: ContactState, x, dx):
    """Per-sample admissible step ``0.9 g / (-grad g . dx)`` (inf if the gap grows)."""
    if len(state) == 0:
        return np.zeros(0)
    g, rate = _kernels.backend.gap_rates(np.asarray(x, dtype=float), np.asarray(dx, dtype=float).reshape(-1, 3),
                                         *state.kernel_args())
    if np.any(g <= 0):
        _raise_infeasible(g)
    out = np.full(len(g), np.inf)
    dec = rate < 0
    with np.errstate(over="ignore"):
        out[dec] = 0.9 * g[dec] / (-rate[dec])
    return out


def step_filter(state: ContactState, x, dx) -> float:
    """Largest step fraction in (0, 1] keeping every linearised gap above 10 %."""
    b = step_bounds(state, x, dx)
    return float(min(1.0, b.min())) if b.size else 1.0


def _forces(state, x):
    g = state.gaps(x)
    if np.any(g <= 0):
        _raise_infeasible(g)
    _, dB, _ = _kernels.backend.barrier_terms(g, state.eps)
    return g, -dB


def contact_pressure_field(state: ContactState, x):
    """Per face sample: slave position, gap, weight and pressure.

    Pressure is ``kappa * gamma * (-B'(g))``; inactive samples report 0.
    Returns a dict of arrays (``position``, ``gap``, ``w``, ``gamma``,
    ``pressure``, ``slave_tri``).
    """
    x = np.asarray(x, dtype=float)
    face = state.stype == FACE
    sub = state.select(face)
    if len(sub) == 0:
        z = np.zeros(0)
        return dict(position=np.zeros((0, 3)), gap=z, w=z, gamma=z, pressure=z,
                    slave_tri=np.zeros(0, np.int64))
    g, mdB = _forces(sub, x)
    pos = np.einsum("ka,kad->kd", sub.s_bary, x[sub.s_idx])
    return dict(position=pos, gap=g, w=sub.w.copy(), gamma=sub.gamma.copy(),
                pressure=sub.kappa * sub.gamma * mdB, slave_tri=sub.slave_tri.copy())


def contact_normal_force(state: ContactState, x):
    """Total normal force ``sum kappa w gamma (-B')`` split by sample type."""
    if len(state) == 0:
        return {"face": 0.0, "edge": 0.0, "point": 0.0, "total": 0.0}
    _, mdB = _forces(state, x)
    f = state.coef * mdB
    out = {name: float(np.sum(f[state.stype == t])) for name, t in (("face", FACE), ("edge", EDGE), ("point", POINT))}
    out["total"] = float(np.sum(f))
    return out


def nodal_contact_pressure(state: ContactState, x):
    """Lumped nodal pressure on the slave side.

    Every sample's normal force ``kappa w gamma (-B')`` is spread to the
    slave nodes with its slave barycentrics and divided by the area each node
    receives from the face-sample weights. Returns ``(nodes, pressure,
    area)`` for the slave nodes that carry face samples.
    """
    x = np.asarray(x, dtype=float)
    if len(state) == 0:
        z = np.zeros(0)
        return np.zeros(0, np.int64), z, z
    _, mdB = _forces(state, x)
    f = state.coef * mdB
    nodes, inv = np.unique(state.s_idx.ravel(), return_inverse=True)
    inv = inv.reshape(-1, 3)
    force = np.zeros(len(nodes))
    area = np.zeros(len(nodes))
    np.add.at(force, inv, f[:, None] * state.s_bary)
    face = state.stype == FACE
    np.add.at(area, inv[face], state.w[face, None] * state.s_bary[face])
    has = area > 0
    return nodes[has], force[has] / area[has], area[has]
