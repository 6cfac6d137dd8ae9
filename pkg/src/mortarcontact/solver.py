"""Quasi-static barrier-Newton solver with load stepping.

All bodies share one global node array. Dirichlet conditions are imposed
by eliminating degrees of freedom; contact enters through frozen
:class:`~mortarcontact.contact.ContactState` objects that are rebuilt at
every load step and whenever contact-surface nodes drift too far.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .contact import (BarrierParams, ContactInfeasible, ContactState, build_candidate_pairs,
                      build_contact_state, contact_energy, contact_energy_grad_hess, step_filter)
from .fem import Material, build_element_operators, stiffness_matrix
from .geometry import GeometryError, SurfaceMesh, TetMesh

log = logging.getLogger(__name__)

__all__ = [
    "SolverError",
    "ConvergenceError",
    "LineSearchError",
    "InsufficientConstraints",
    "BoundaryCondition",
    "SolverSettings",
    "Body",
    "ContactInterface",
    "QuasiStaticProblem",
    "SystemState",
    "StepResult",
    "apply_dirichlet",
    "total_energy_grad_hess",
    "newton_solve_step",
    "run_quasistatic",
]

AXES = {"x": 0, "y": 1, "z": 2}


class SolverError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class ConvergenceError(SolverError):
    pass


class LineSearchError(SolverError):
    pass


class InsufficientConstraints(SolverError):
    pass


@dataclass
class BoundaryCondition:
    """Prescribed displacements on the vertices whose rest position lies in a box.

    ``values`` gives one target displacement per constrained axis.
    ``body`` restricts the selection to one body of a problem.
    """

    box_min: Sequence[float]
    box_max: Sequence[float]
    axes: str = "xyz"
    values: Optional[Sequence[float]] = None
    body: Optional[str] = None

    def __post_init__(self):
        self.box_min = np.asarray(self.box_min, dtype=float)
        self.box_max = np.asarray(self.box_max, dtype=float)
        if any(a not in AXES for a in self.axes) or not self.axes:
            raise ValueError(f"constrained axes must be a subset of 'xyz', got {self.axes!r}")
        if self.values is None:
            self.values = [0.0] * len(self.axes)
        if len(self.values) != len(self.axes):
            raise ValueError("one target value per constrained axis is required")

    def select(self, points, tol=0.0) -> np.ndarray:
        return np.flatnonzero(np.all((points >= self.box_min - tol) & (points <= self.box_max + tol), axis=1))


@dataclass
class SolverSettings:
    load_steps: int = 1
    newton_tol: Optional[float] = None
    max_newton_iters: int = 100
    ls_shrink: float = 0.5
    ls_max_halvings: int = 40
    linear_tol: float = 1e-10
    headroom: float = 0.5
    rebuild_distance: float = 0.5
    sampling_positions: str = "initial"

    def __post_init__(self):
        if self.load_steps < 1 or self.max_newton_iters < 1:
            raise ValueError("load_steps and max_newton_iters must be >= 1")
        if not 0 < self.ls_shrink < 1:
            raise ValueError("ls_shrink must lie in (0, 1)")
        if self.newton_tol is not None and not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.sampling_positions not in ("initial", "current"):
            raise ValueError("sampling_positions must be 'initial' or 'current'")
        if not (self.linear_tol > 0 and self.headroom > 0 and self.rebuild_distance > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class Body:
    name: str
    mesh: TetMesh
    material: Material


@dataclass
class ContactInterface:
    """Slave and master surfaces (``vertex_map`` in global node ids) plus barrier settings."""

    slave: SurfaceMesh
    master: SurfaceMesh
    params: BarrierParams
    name: str = "contact"


class QuasiStaticProblem:
    """Bodies, loads, constraints and contact interfaces in global numbering."""

    def __init__(self, bodies: Sequence[Body], bcs: Sequence[BoundaryCondition] = (),
                 external_forces=None, contacts: Sequence[ContactInterface] = ()):
        names = [b.name for b in bodies]
        if len(set(names)) != len(names):
            raise ValueError("body names must be unique")
        self.bodies = list(bodies)
        self.offsets = {}
        off = 0
        tets, rest = [], []
        for b in bodies:
            self.offsets[b.name] = off
            tets.append(b.mesh.tets + off)
            rest.append(b.mesh.rest_vertices)
            off += b.mesh.n_vertices
        self.n_nodes = off
        self.rest = np.vstack(rest) if rest else np.zeros((0, 3))
        self.ops = []
        blocks = []
        for b in bodies:
            ops = build_element_operators(b.mesh)
            self.ops.append(ops)
            blocks.append(stiffness_matrix(ops, b.material, b.mesh.n_vertices))
        self.K = sp.block_diag(blocks, format="csr") if blocks else sp.csr_matrix((0, 0))
        self.tets = np.vstack(tets) if tets else np.zeros((0, 4), np.int64)
        self.f_ext = np.zeros((self.n_nodes, 3)) if external_forces is None else np.asarray(external_forces, float)
        self.bcs = list(bcs)
        self.contacts = list(contacts)
        self.fixed, self.targets = apply_dirichlet(self, self.bcs)
        self.free = np.setdiff1d(np.arange(3 * self.n_nodes), self.fixed)
        cs = [np.concatenate([self._gids(c.slave), self._gids(c.master)]) for c in self.contacts]
        self.contact_nodes = np.unique(np.concatenate(cs)) if cs else np.zeros(0, np.int64)

    @staticmethod
    def _gids(surface):
        return surface.vertex_map if surface.vertex_map is not None else np.arange(len(surface.vertices))

    def body_nodes(self, name) -> np.ndarray:
        off = self.offsets[name]
        n = next(b for b in self.bodies if b.name == name).mesh.n_vertices
        return np.arange(off, off + n)

    def characteristic_force(self) -> float:
        E = max(b.material.E for b in self.bodies)
        x = self.rest
        t = self.tets
        edges = np.concatenate([t[:, [i, j]] for i in range(4) for j in range(i + 1, 4)])
        lbar = float(np.mean(np.linalg.norm(x[edges[:, 1]] - x[edges[:, 0]], axis=1)))
        return max(float(np.abs(self.f_ext).max(initial=0.0)), E * lbar ** 2 * 1e-6)

    def default_tol(self) -> float:
        return 1e-6 * self.characteristic_force()


def apply_dirichlet(problem: QuasiStaticProblem, bcs: Sequence[BoundaryCondition]):
    """Constrained DOF ids (``3 * node + axis``, sorted) and their target displacements.

    Overlapping selections are merged; conflicting targets raise.
    """
    targets = {}
    for i, bc in enumerate(bcs):
        if bc.body is not None:
            if bc.body not in problem.offsets:
                raise ValueError(f"boundary condition {i} references unknown body {bc.body!r}")
            cand = problem.body_nodes(bc.body)
        else:
            cand = np.arange(problem.n_nodes)
        sel = cand[bc.select(problem.rest[cand])]
        if sel.size == 0:
            raise ValueError(f"boundary condition {i} selects no vertices")
        for a, v in zip(bc.axes, bc.values):
            for d in 3 * sel + AXES[a]:
                old = targets.setdefault(int(d), float(v))
                if old != float(v):
                    raise ValueError(f"boundary condition {i} conflicts with an earlier target on dof {d}")
    dofs = np.array(sorted(targets), dtype=np.int64)
    vals = np.array([targets[d] for d in dofs], dtype=float)
    return dofs, vals


@dataclass
class SystemState:
    x: np.ndarray
    x_ref: np.ndarray
    x0: np.ndarray
    load_factor: float = 0.0
    contact_states: List[ContactState] = field(default_factory=list)
    x_build: Optional[np.ndarray] = None
    history: List[dict] = field(default_factory=list)
    n_rebuilds: int = 0

    @classmethod
    def initial(cls, problem: QuasiStaticProblem):
        x = problem.rest.copy()
        x.ravel()[problem.fixed] = problem.rest.ravel()[problem.fixed] + problem.targets
        return cls(x=x, x_ref=x.copy(), x0=x.copy())


def rebuild_contacts(problem: QuasiStaticProblem, state: SystemState, sampling_positions="initial"):
    """Re-run broadphase at the current positions and resample the candidates.

    With ``sampling_positions="initial"`` the clipping geometry is taken
    from the penetration-free start ``x0`` (a small-displacement choice that
    makes the frozen samples independent of the load path); with
    ``"current"`` it follows the current positions. Support radii always
    use gaps at ``x0``.
    """
    states = []
    xs = state.x0 if sampling_positions == "initial" else state.x
    for c in problem.contacts:
        pairs = build_candidate_pairs(c.slave, c.master, c.params.radius, state.x)
        states.append(build_contact_state(pairs, xs, c.params, gap_reference_positions=state.x0,
                                          current_positions=state.x))
    state.contact_states = states
    state.x_build = state.x.copy()
    state.n_rebuilds += 1


def _forces(problem, state):
    return state.load_factor * problem.f_ext


def total_energy_grad_hess(problem: QuasiStaticProblem, state: SystemState, want_hess=True):
    """Total energy and free-DOF gradient / Hessian.

    ``E = 1/2 u.K u - f.u + sum of barrier potentials`` with ``u = x - rest``
    and ``f`` the external load scaled by the load factor.
    """
    u = (state.x - problem.rest).ravel()
    Ku = problem.K @ u
    f = _forces(problem, state).ravel()
    E = 0.5 * float(u @ Ku) - float(f @ u)
    grad = Ku - f
    H = problem.K
    for cs in state.contact_states:
        Ec, gc, Hc = contact_energy_grad_hess(cs, state.x, want_hess)
        E += Ec
        grad = grad + gc.ravel()
        if want_hess and Hc.nnz:
            H = H + Hc
    gf = grad[problem.free]
    if not want_hess:
        return E, gf, None
    Hf = H.tocsr()[problem.free][:, problem.free]
    return E, gf, Hf


def _factor(H, allow_singular):
    """Sparse LU with a small-pivot check; regularises by 1e-8 mean(diag) once."""
    H = H.tocsc()
    diag = H.diagonal()
    scale = float(np.mean(np.abs(diag))) if diag.size else 1.0

    def lu_of(M):
        lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A", options=dict(SymmetricMode=True))
        piv = np.abs(lu.U.diagonal())
        return lu, piv.min() <= 1e-11 * piv.max()

    try:
        lu, small = lu_of(H)
    except RuntimeError:
        lu, small = None, True
    if not small:
        return lu, False
    reg = H + 1e-8 * scale * sp.identity(H.shape[0], format="csc")
    try:
        lu, small = lu_of(reg)
    except RuntimeError as exc:
        raise InsufficientConstraints("stiffness factorisation failed; the scene has unconstrained rigid modes") from exc
    if not allow_singular:
        raise InsufficientConstraints("singular stiffness: the scene has insufficient constraints "
                                      "to remove rigid-body modes")
    return lu, True


def _contact_energy_change(states_, x_old, x_new):
    """Barrier energy difference summed per sample (avoids cancellation); None if infeasible."""
    total = 0.0
    for cs in states_:
        if len(cs) == 0:
            continue
        try:
            e_new = contact_energy(cs, x_new, per_sample=True)
        except ContactInfeasible:
            return None
        e_old = contact_energy(cs, x_old, per_sample=True)
        total += float(np.sum(e_new - e_old))
    return total


def _min_gap(states_, x):
    g = [cs.gaps(x).min() for cs in states_ if len(cs)]
    return float(min(g)) if g else float("inf")


@dataclass
class StepResult:
    step: int
    load_factor: float
    x: np.ndarray
    iterations: int
    residual: float
    energy: float
    min_gap: float
    contact_states: List[ContactState]
    wall_time: float
    history: List[dict] = field(default_factory=list)
    n_rebuilds: int = 0


def newton_solve_step(problem: QuasiStaticProblem, state: SystemState, settings: SolverSettings,
                      tol: Optional[float] = None, step_index: int = 0) -> StepResult:
    """Minimise the total energy at the current load factor."""
    t0 = time.perf_counter()
    h0 = len(state.history)
    r0 = state.n_rebuilds
    tol = settings.newton_tol if tol is None else tol
    if tol is None:
        tol = problem.default_tol()
    free = problem.free
    eps_max = min((c.params.eps_max for c in problem.contacts), default=np.inf)
    K = problem.K
    residual = np.inf
    E = 0.0
    for it in range(settings.max_newton_iters + 1):
        E, gf, Hf = total_energy_grad_hess(problem, state)
        residual = float(np.abs(gf).max(initial=0.0))
        if residual <= tol:
            break
        if it == settings.max_newton_iters:
            raise ConvergenceError(f"Newton did not converge in {settings.max_newton_iters} iterations "
                                   f"(residual {residual:.3e}, tolerance {tol:.3e})", residual)
        lu, regularised = _factor(Hf, allow_singular=bool(problem.contacts))
        d = lu.solve(-gf)
        if not np.all(np.isfinite(d)):
            raise SolverError("linear solve produced non-finite values", residual)
        dx = np.zeros(3 * problem.n_nodes)
        dx[free] = d
        dx3 = dx.reshape(-1, 3)
        alpha = 1.0
        for cs in state.contact_states:
            alpha = min(alpha, step_filter(cs, state.x, dx3))
        if problem.contact_nodes.size:
            move = float(np.linalg.norm(dx3[problem.contact_nodes], axis=1).max())
            if move > 0:
                alpha = min(alpha, settings.headroom * eps_max / move)
        # quadratic part of the energy change along dx
        u = (state.x - problem.rest).ravel()
        lin = float(dx @ (K @ u)) - float(dx @ _forces(problem, state).ravel())
        quad = 0.5 * float(dx @ (K @ dx))
        accepted = False
        for _ in range(settings.ls_max_halvings + 1):
            x_new = state.x + alpha * dx3
            dpsi = _contact_energy_change(state.contact_states, state.x, x_new)
            if dpsi is not None:
                dE = alpha * lin + alpha * alpha * quad + dpsi
                if dE < 0:
                    accepted = True
                    break
            alpha *= settings.ls_shrink
        if not accepted:
            raise LineSearchError(f"line search failed after {settings.ls_max_halvings} halvings "
                                  f"(residual {residual:.3e})", residual)
        min_gap = _min_gap(state.contact_states, x_new)
        if not min_gap > 0:   # guarded above; kept as an audit assertion
            raise ContactInfeasible("accepted iterate with a non-positive gap")
        state.x = x_new
        state.history.append(dict(step=step_index, iter=it, residual=residual, energy=E, alpha=alpha,
                                  min_gap=min_gap, regularised=regularised))
        if (problem.contacts and state.x_build is not None and problem.contact_nodes.size and
                np.linalg.norm((state.x - state.x_build)[problem.contact_nodes], axis=1).max()
                > settings.rebuild_distance * eps_max):
            rebuild_contacts(problem, state, settings.sampling_positions)
    min_gap = _min_gap(state.contact_states, state.x)
    return StepResult(step_index, state.load_factor, state.x.copy(), it, residual, E, min_gap,
                      list(state.contact_states), time.perf_counter() - t0,
                      state.history[h0:], state.n_rebuilds - r0)


def run_quasistatic(problem: QuasiStaticProblem, settings: SolverSettings,
                    callback: Optional[Callable[[StepResult, SystemState], None]] = None) -> List[StepResult]:
    """Ramp the load linearly over ``settings.load_steps`` and solve each step."""
    state = SystemState.initial(problem)
    tol = settings.newton_tol if settings.newton_tol is not None else problem.default_tol()
    results = []
    for k in range(1, settings.load_steps + 1):
        state.load_factor = k / settings.load_steps
        state.x_ref = state.x.copy()
        if problem.contacts:
            rebuild_contacts(problem, state, settings.sampling_positions)
        res = newton_solve_step(problem, state, settings, tol=tol, step_index=k)
        results.append(res)
        if callback is not None:
            callback(res, state)
    return results
