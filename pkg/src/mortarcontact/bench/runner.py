"""Turn a :class:`SceneConfig` into a solved problem and write its outputs."""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..contact import (FACE, BarrierParams, contact_normal_force, contact_pressure_field,
                       nodal_contact_pressure)
from ..fem import VOIGT, Material, element_stresses, pressure_load_forces
from ..geometry import SurfaceMesh, TetMesh, extract_boundary_surface, make_block
from ..meshio import load_tet_mesh, write_vtk_unstructured
from ..solver import (Body, BoundaryCondition, ContactInterface, QuasiStaticProblem, SolverSettings,
                      StepResult, run_quasistatic)
from .meshers import quarter_cylinder_block, sphere_octant
from .scene import SceneConfig, SceneError

log = logging.getLogger(__name__)

__all__ = ["BuiltScene", "RunResult", "build_scene", "run_scene", "select_faces", "write_report",
           "write_csv"]


@dataclass
class BuiltScene:
    config: SceneConfig
    problem: QuasiStaticProblem
    meshes: Dict[str, TetMesh]
    surfaces: Dict[str, SurfaceMesh]
    settings: SolverSettings
    applied_force: np.ndarray


@dataclass
class RunResult:
    scene: BuiltScene
    steps: List[StepResult]
    wall_time: float
    stresses: Dict[str, np.ndarray] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)

    @property
    def x(self):
        return self.steps[-1].x if self.steps else self.scene.problem.rest

    def body_displacement(self, name):
        p = self.scene.problem
        ids = p.body_nodes(name)
        return self.x[ids] - p.rest[ids]


def _mesh_of(sec) -> TetMesh:
    g = sec["generator"]
    if g == "block":
        return make_block(sec["size"], sec["divisions"], sec["origin"])
    if g == "file":
        return load_tet_mesh(sec["node"], sec["ele"])
    grading = sec["grading"]
    if g == "hertz-block":
        gr = (grading[0], grading[1] if len(grading) > 1 else 3.0)
        m = quarter_cylinder_block(sec["radius"], sec["height"], sec["divisions"], gr)
    else:
        m = sphere_octant(sec["radius"], sec["gap"], sec["divisions"], grading[0])
    shift = np.asarray(sec["origin"], dtype=float)
    if np.any(shift):
        m = TetMesh(m.vertices + shift, m.tets)
    return m


def select_faces(surface: SurfaceMesh, box_min, box_max, normal=None, cone=0.9) -> np.ndarray:
    """Boundary triangles with all vertices in the box and, if ``normal`` is
    given, unit normal within the cone ``n . normal >= cone``."""
    lo = np.asarray(box_min, dtype=float)
    hi = np.asarray(box_max, dtype=float)
    v = surface.vertices[surface.triangles]
    ok = np.all((v >= lo) & (v <= hi), axis=(1, 2))
    if normal is not None:
        d = np.asarray(normal, dtype=float)
        ok &= surface.normals() @ (d / np.linalg.norm(d)) >= cone
    return np.flatnonzero(ok)


def build_scene(config: SceneConfig) -> BuiltScene:
    meshes, surfaces, bodies = {}, {}, []
    for sec in config.bodies:
        try:
            mat = Material(sec["E"], sec["nu"])
        except ValueError as exc:
            raise SceneError(f"{config.source}:{sec.line}: body {sec.name!r}: {exc}") from exc
        mesh = _mesh_of(sec)
        meshes[sec.name] = mesh
        surfaces[sec.name] = extract_boundary_surface(mesh)
        bodies.append(Body(sec.name, mesh, mat))
    offsets, off = {}, 0
    for b in bodies:
        offsets[b.name] = off
        off += b.mesh.n_vertices
    f = np.zeros((off, 3))
    for ld in config.loads:
        surf = surfaces[ld["body"]]
        faces = select_faces(surf, ld["box_min"], ld["box_max"], ld["normal"], ld["cone"])
        if faces.size == 0:
            raise SceneError(f"{config.source}:{ld.line}: load {ld.name!r} selects no faces")
        fl = pressure_load_forces(surf, faces, ld["magnitude"], ld["direction"])
        np.add.at(f, surf.vertex_map + offsets[ld["body"]], fl)
    for bf in config.body_forces:
        mesh = meshes[bf["body"]]
        share = np.outer(mesh.volumes() / 4.0, bf["density"])
        for a in range(4):
            np.add.at(f, mesh.tets[:, a] + offsets[bf["body"]], share)
    bcs = [BoundaryCondition(s["box_min"], s["box_max"], s["axes"], s["values"], s["body"] or None)
           for s in config.bcs]
    contacts = []
    for c in config.contacts:
        sides = []
        for role in ("slave", "master"):
            surf = surfaces[c[role]]
            faces = select_faces(surf, c[f"{role}_box_min"], c[f"{role}_box_max"], c[f"{role}_normal"],
                                 c[f"{role}_cone"])
            if faces.size == 0:
                raise SceneError(f"{config.source}:{c.line}: contact {c.name!r} selects no {role} faces")
            sub = surf.subset(faces)
            sub.vertex_map = sub.vertex_map + offsets[c[role]]
            sides.append(sub)
        params = BarrierParams(kappa=c["kappa"], eps_max=c["eps_max"], kappa_edge=c["kappa_edge"],
                               kappa_point=c["kappa_point"], delta_T=c["delta_T"], delta_e=c["delta_e"],
                               detection_radius=c["detection_radius"], quad_order_face=c["quad_order_face"],
                               quad_order_edge=c["quad_order_edge"])
        contacts.append(ContactInterface(sides[0], sides[1], params, c.name))
    try:
        problem = QuasiStaticProblem(bodies, bcs, f, contacts)
    except ValueError as exc:
        raise SceneError(f"{config.source}: {exc}") from exc
    s = config.solver
    settings = SolverSettings(load_steps=s["load_steps"], newton_tol=s["newton_tol"],
                              max_newton_iters=s["max_newton_iters"], ls_shrink=s["ls_shrink"],
                              ls_max_halvings=s["ls_max_halvings"], linear_tol=s["linear_tol"],
                              headroom=s["headroom"], rebuild_distance=s["rebuild_distance"],
                              sampling_positions=s["sampling_positions"])
    return BuiltScene(config, problem, meshes, surfaces, settings, f.sum(axis=0))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(t) for t in v)
    return str(v)


def write_report(path, items):
    with open(path, "w") as fh:
        for k, v in items:
            fh.write(f"{k}={_fmt(v)}\n")


def write_csv(path, header, columns):
    cols = [np.asarray(c) for c in columns]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _stress(scene: BuiltScene, x):
    out = {}
    p = scene.problem
    for ops, body in zip(p.ops, p.bodies):
        ids = p.body_nodes(body.name)
        out[body.name] = element_stresses(ops, body.material, x[ids] - p.rest[ids])
    return out


def _write_step(scene: BuiltScene, res: StepResult, out_dir, files, tag, vtk=True, csv=True):
    p = scene.problem
    stresses = _stress(scene, res.x)
    for body in (p.bodies if vtk else []):
        ids = p.body_nodes(body.name)
        xb = res.x[ids]
        sig = stresses[body.name]
        cd = {f"sigma_{c}": sig[:, i] for i, c in enumerate(VOIGT)}
        path = os.path.join(out_dir, f"{tag}_{body.name}.vtk")
        write_vtk_unstructured(path, xb, body.mesh.tets, cell_data=cd,
                               point_data={"displacement": xb - p.rest[ids]}, title=f"{body.name} {tag}")
        files.append(path)
        surf = scene.surfaces[body.name]
        path = os.path.join(out_dir, f"{tag}_{body.name}_surface.vtk")
        write_vtk_unstructured(path, xb[surf.vertex_map], surf.triangles, title=f"{body.name} surface {tag}")
        files.append(path)
    for iface, cs in zip(p.contacts, res.contact_states if csv else []):
        pf = contact_pressure_field(cs, res.x)
        smooth = smoothed_sample_pressure(cs, res.x)
        pos = pf["position"]
        path = os.path.join(out_dir, f"{tag}_contact_{iface.name}.csv")
        write_csv(path, ["x", "y", "z", "r", "gap", "w", "gamma", "pressure", "nodal_pressure"],
                  [pos[:, 0], pos[:, 1], pos[:, 2], np.hypot(pos[:, 0], pos[:, 1]), pf["gap"], pf["w"],
                   pf["gamma"], pf["pressure"], smooth])
        files.append(path)
    return stresses


def smoothed_sample_pressure(cs, x) -> np.ndarray:
    """Lumped nodal pressure interpolated back to every face sample."""
    nodes, pn, _ = nodal_contact_pressure(cs, x)
    face = cs.stype == FACE
    idx = cs.s_idx[face]
    if idx.size == 0 or nodes.size == 0:
        return np.zeros(int(face.sum()))
    pos = np.clip(np.searchsorted(nodes, idx), 0, len(nodes) - 1)
    vals = np.where(nodes[pos] == idx, pn[pos], 0.0)
    return np.einsum("ka,ka->k", cs.s_bary[face], vals)


def run_scene(config: SceneConfig, out_dir: Optional[str] = None, seq: bool = False,
              write: bool = True, extra_report=None) -> RunResult:
    """Build, solve and (optionally) write VTK, CSV and a key=value report.

    ``seq`` keeps timing out of the written files so that reruns are
    bitwise identical; the wall time is still returned.
    """
    t0 = time.perf_counter()
    scene = build_scene(config)
    out_dir = out_dir or config.output["dir"]
    files: List[str] = []
    if write:
        try:
            os.makedirs(out_dir, exist_ok=True)
            probe = os.path.join(out_dir, ".write_test")
            with open(probe, "w"):
                pass
            os.remove(probe)
        except OSError as exc:
            raise OSError(f"output directory {out_dir!r} is not writable: {exc.strerror}") from exc
    every = config.output["every_step"]

    def on_step(res: StepResult, state):
        if write and (every or res.step == scene.settings.load_steps):
            _write_step(scene, res, out_dir, files, f"step_{res.step:03d}", config.output["vtk"],
                        config.output["csv"])

    steps = run_quasistatic(scene.problem, scene.settings, on_step)
    wall = time.perf_counter() - t0
    run = RunResult(scene, steps, wall, _stress(scene, steps[-1].x) if steps else {}, files)
    if write:
        items = report_items(run, seq)
        if extra_report:
            items += list(extra_report(run))
        path = os.path.join(out_dir, "report.txt")
        write_report(path, items)
        files.append(path)
    return run


def report_items(run: RunResult, seq: bool):
    scene = run.scene
    p = scene.problem
    items = [("source", scene.config.source)]
    items += scene.config.echo()
    tol = scene.settings.newton_tol or p.default_tol()
    items += [("solver.resolved_newton_tol", tol), ("nodes", p.n_nodes), ("tets", len(p.tets)),
              ("free_dofs", len(p.free)), ("applied_force", scene.applied_force)]
    for r in run.steps:
        pre = f"step.{r.step:03d}"
        items += [(f"{pre}.load_factor", r.load_factor), (f"{pre}.iterations", r.iterations),
                  (f"{pre}.residual", r.residual), (f"{pre}.energy", r.energy),
                  (f"{pre}.min_gap", r.min_gap), (f"{pre}.rebuilds", r.n_rebuilds)]
        for iface, cs in zip(p.contacts, r.contact_states):
            c = cs.counts()
            fz = contact_normal_force(cs, r.x)
            items += [(f"{pre}.contact.{iface.name}.samples", f"{c['face']},{c['edge']},{c['point']}"),
                      (f"{pre}.contact.{iface.name}.normal_force", fz["total"])]
    items.append(("total_iterations", sum(r.iterations for r in run.steps)))
    if run.steps:
        items.append(("final_residual", run.steps[-1].residual))
        items.append(("min_accepted_gap", min((h["min_gap"] for r in run.steps for h in r.history),
                                              default=float("inf"))))
    if not seq:
        items.append(("wall_time_s", run.wall_time))
    return items
