"""Contact patch test: two stacked unit blocks with non-matching meshes.

A uniform pressure on the top block must be transmitted across the contact
interface as the uniform stress ``sigma_zz = -pressure``; every other Cauchy
component should vanish.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .runner import RunResult, run_scene
from .scene import SceneConfig, parse_scene_text
from ..contact import contact_normal_force

__all__ = ["PatchReport", "patch_scene_text", "patch_report", "run_patch_test"]

SIZE = (1.0, 1.0, 0.5)
GAP = 0.002
YOUNG = 1000.0


@dataclass(frozen=True)
class PatchReport:
    """Stress-transfer metrics of a patch-test run.

    Attributes
    ----------
    kappa : float
        Barrier stiffness used on the interface.
    sigma_zz_max_rel_err : float
        ``max |sigma_zz + p| / p`` over all tets (absolute error if ``p`` is 0).
    sigma_spur : float
        Largest absolute off-target stress component over all tets.
    contact_force : float
        Total slave-side contact normal force at the last step.
    applied_force : float
        Magnitude of the resultant applied load.
    iterations : int
        Newton iterations summed over load steps.
    """

    kappa: float
    sigma_zz_max_rel_err: float
    sigma_spur: float
    contact_force: float
    applied_force: float
    iterations: int

    @property
    def force_balance_error(self) -> float:
        if self.applied_force == 0:
            return abs(self.contact_force)
        return abs(self.contact_force - self.applied_force) / self.applied_force


def _ivec(v: Sequence[int]) -> str:
    return ", ".join(str(int(t)) for t in v)


def patch_scene_text(kappa: float = 1e6, divisions_bottom: Sequence[int] = (5, 5, 2),
                     divisions_top: Sequence[int] = (4, 4, 2), pressure: float = 10.0,
                     load_steps: int = 1, out_dir: str = "out/patch") -> str:
    """Scene file text for the patch test (same defaults as :func:`run_patch_test`)."""
    lx, ly, lz = SIZE
    z_top = lz + GAP
    tol = 1e-9
    return f"""\
# contact patch test: non-matching stacked blocks
[solver]
load_steps = {int(load_steps)}

[output]
dir = {out_dir}

[body bottom]
generator = block
size = {lx!r}, {ly!r}, {lz!r}
divisions = {_ivec(divisions_bottom)}
E = {YOUNG!r}
nu = 0.0

[body top]
generator = block
size = {lx!r}, {ly!r}, {lz!r}
divisions = {_ivec(divisions_top)}
origin = 0.0, 0.0, {z_top!r}
E = {YOUNG!r}
nu = 0.0

[bc clamp_bottom]
body = bottom
box_min = -inf, -inf, {-tol!r}
box_max = inf, inf, {tol!r}
axes = xyz

[bc guide_top]
body = top
axes = xy

[load pressure]
body = top
magnitude = {float(pressure)!r}
direction = 0, 0, -1
box_min = -inf, -inf, {z_top + lz - tol!r}
normal = 0, 0, 1

[contact interface]
slave = bottom
master = top
slave_box_min = -inf, -inf, {lz - tol!r}
slave_normal = 0, 0, 1
master_box_max = inf, inf, {z_top + tol!r}
master_normal = 0, 0, -1
kappa = {float(kappa)!r}
eps_max = 0.001
"""


def patch_report(run: RunResult, pressure: Optional[float] = None) -> PatchReport:
    """Patch metrics of a finished run (pressure read from the scene if omitted)."""
    cfg = run.scene.config
    if pressure is None:
        pressure = cfg.loads[0]["magnitude"]
    sig = np.vstack([run.stresses[b.name] for b in cfg.bodies])
    err = np.abs(sig[:, 2] + pressure)
    rel = err.max() / abs(pressure) if pressure != 0 else err.max()
    spur = float(np.abs(sig[:, [0, 1, 3, 4, 5]]).max())
    last = run.steps[-1]
    force = sum(contact_normal_force(cs, last.x)["total"] for cs in last.contact_states)
    kappa = cfg.contacts[0]["kappa"]
    return PatchReport(float(kappa), float(rel), spur, float(force),
                       float(np.linalg.norm(run.scene.applied_force)),
                       int(sum(r.iterations for r in run.steps)))


def patch_config(kappa=1e6, divisions_bottom=(5, 5, 2), divisions_top=(4, 4, 2), pressure=10.0,
                 load_steps=1, out_dir="out/patch") -> SceneConfig:
    text = patch_scene_text(kappa, divisions_bottom, divisions_top, pressure, load_steps, out_dir)
    return parse_scene_text(text, "<patch-test>")


def report_lines(rep: PatchReport):
    return [("patch.kappa", rep.kappa), ("patch.sigma_zz_max_rel_err", rep.sigma_zz_max_rel_err),
            ("patch.sigma_spur", rep.sigma_spur), ("patch.contact_force", rep.contact_force),
            ("patch.applied_force", rep.applied_force),
            ("patch.force_balance_rel_err", rep.force_balance_error)]


def run_patch_test(kappa: float = 1e6, divisions_bottom: Sequence[int] = (5, 5, 2),
                   divisions_top: Sequence[int] = (4, 4, 2), pressure: float = 10.0,
                   load_steps: int = 1, out_dir: Optional[str] = None,
                   seq: bool = False) -> Tuple[PatchReport, RunResult]:
    """Run the patch test; nothing is written unless ``out_dir`` is given.

    Returns
    -------
    PatchReport, RunResult
    """
    if tuple(divisions_bottom) == tuple(divisions_top):
        raise ValueError("patch test needs non-matching meshes: bottom and top divisions are equal")
    cfg = patch_config(kappa, divisions_bottom, divisions_top, pressure, load_steps, out_dir or "out/patch")
    holder = {}

    def extra(run):
        rep = holder["rep"] = patch_report(run, pressure)
        return report_lines(rep)

    run = run_scene(cfg, out_dir=out_dir, seq=seq, write=out_dir is not None, extra_report=extra)
    rep = holder.get("rep") or patch_report(run, pressure)
    return rep, run
