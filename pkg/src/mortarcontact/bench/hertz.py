"""Hertz benchmark: a one-eighth sphere pressed into a quarter-cylinder block.

The numerical contact pressure is compared with the analytic elliptic
profile ``p(r) = p0 sqrt(1 - r^2 / alpha_H^2)``. The load ``Q`` is a uniform
pressure on the flat top of the hemisphere, so the total force on the full
sphere is ``Q pi R^2``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..contact import FACE, contact_normal_force, contact_pressure_field, nodal_contact_pressure
from .runner import RunResult, run_scene, smoothed_sample_pressure, write_csv
from .scene import SceneConfig, parse_scene_text

__all__ = ["HertzOracle", "HertzSummary", "hertz_scene_text", "hertz_config", "hertz_summary", "run_hertz"]

RADIUS = 0.05
BLOCK_RADIUS = 0.12
BLOCK_HEIGHT = 0.06
GAP = 5e-5
LOAD = 1e7
YOUNG = 2.1e11
POISSON = 0.3
EPS_MAX = 1e-5
KAPPA = 1e14
BLOCK_DIVISIONS = (14, 14, 7)
BLOCK_GRADING = (5.5, 3.0)
SPHERE_DIVISIONS = (11, 11, 11)
SPHERE_GRADING = 4.5


@dataclass(frozen=True)
class HertzOracle:
    """Analytic Hertz solution for a sphere on a half-space of the same material.

    Parameters
    ----------
    Q : float
        Uniform pressure applied on the sphere's flat top (Pa).
    R : float
        Sphere radius (m).
    E, nu : float
        Young's modulus and Poisson ratio shared by both bodies.
    """

    Q: float = LOAD
    R: float = RADIUS
    E: float = YOUNG
    nu: float = POISSON

    @property
    def E_star(self) -> float:
        return self.E / (2.0 * (1.0 - self.nu ** 2))

    @property
    def alpha_H(self) -> float:
        """Contact radius."""
        return (3.0 * self.Q * math.pi * self.R ** 3 / (4.0 * self.E_star)) ** (1.0 / 3.0)

    @property
    def p0(self) -> float:
        """Peak pressure at the centre of contact."""
        return 3.0 * self.Q * self.R ** 2 / (2.0 * self.alpha_H ** 2)

    def p(self, r):
        """Pressure at radial distance ``r`` (zero outside the contact disk)."""
        s = 1.0 - (np.asarray(r, dtype=float) / self.alpha_H) ** 2
        return self.p0 * np.sqrt(np.clip(s, 0.0, None))


@dataclass(frozen=True)
class HertzSummary:
    """Error metrics of a Hertz run; ``peak``/``radius`` use the lumped nodal
    pressure and the ``raw_`` variants the per-sample pressure."""

    p0: float
    alpha_H: float
    peak: float
    peak_rel_err: float
    contact_radius: float
    contact_radius_rel_err: float
    outside_ratio: float
    raw_peak: float
    raw_peak_rel_err: float
    raw_contact_radius: float
    raw_contact_radius_rel_err: float
    raw_outside_ratio: float
    contact_force: float
    applied_force: float
    tets: Tuple[int, int]
    positive_samples: Tuple[int, ...]

    def items(self):
        return [(f"hertz.{k}", getattr(self, k)) for k in self.__dataclass_fields__]


def _scaled(div, refine):
    return tuple(max(2, int(round(d * refine))) for d in div)


def hertz_scene_text(refine: float = 1.0, load_steps: int = 10, kappa: float = KAPPA,
                     out_dir: str = "out/hertz") -> str:
    """Scene file text of the quarter-symmetry Hertz model.

    ``refine`` scales every mesh division count (1 gives about 8k tets per body).
    """
    bd = _scaled(BLOCK_DIVISIONS, refine)
    sd = _scaled(SPHERE_DIVISIONS, refine)
    t = 1e-12
    z_top = GAP + RADIUS
    iv = lambda v: ", ".join(str(i) for i in v)
    return f"""\
# Hertz contact, quarter-symmetry model
[solver]
load_steps = {int(load_steps)}

[output]
dir = {out_dir}
every_step = no

[body block]
generator = hertz-block
radius = {BLOCK_RADIUS!r}
height = {BLOCK_HEIGHT!r}
divisions = {iv(bd)}
grading = {BLOCK_GRADING[0]!r}, {BLOCK_GRADING[1]!r}
E = {YOUNG!r}
nu = {POISSON!r}

[body ball]
generator = hertz-hemisphere
radius = {RADIUS!r}
gap = {GAP!r}
divisions = {iv(sd)}
grading = {SPHERE_GRADING!r}
E = {YOUNG!r}
nu = {POISSON!r}

[bc symmetry_x]
box_min = {-t!r}, -inf, -inf
box_max = {t!r}, inf, inf
axes = x

[bc symmetry_y]
box_min = -inf, {-t!r}, -inf
box_max = inf, {t!r}, inf
axes = y

[bc block_base]
body = block
box_max = inf, inf, {-BLOCK_HEIGHT + t!r}
axes = z

[load top_pressure]
body = ball
magnitude = {LOAD!r}
direction = 0, 0, -1
box_min = -inf, -inf, {z_top - 1e-9!r}
normal = 0, 0, 1
cone = 0.99

[contact hertz]
slave = block
master = ball
slave_box_min = -inf, -inf, {-t!r}
slave_normal = 0, 0, 1
slave_cone = 0.99
master_normal = 0, 0, -1
master_cone = -0.01
kappa = {float(kappa)!r}
eps_max = {EPS_MAX!r}
"""


def hertz_config(refine=1.0, load_steps=10, kappa=KAPPA, out_dir="out/hertz") -> SceneConfig:
    return parse_scene_text(hertz_scene_text(refine, load_steps, kappa, out_dir), "<hertz>")


def _metrics(r, p, oracle):
    peak = float(p.max()) if p.size else 0.0
    if peak <= 0:
        return peak, -1.0, 0.0, 0.0, -1.0, 0.0
    rc = float(r[p >= 0.05 * peak].max())
    outside = p[r > 1.2 * oracle.alpha_H]
    ratio = float(outside.max() / peak) if outside.size else 0.0
    return peak, peak / oracle.p0 - 1.0, rc, rc / oracle.alpha_H - 1.0, ratio


def hertz_profile(run: RunResult) -> Dict[str, np.ndarray]:
    """Per face sample ``r``, raw and nodal-lumped pressure at the last step."""
    last = run.steps[-1]
    cs = last.contact_states[0]
    pf = contact_pressure_field(cs, last.x)
    r = np.hypot(pf["position"][:, 0], pf["position"][:, 1])
    return {"r": r, "p_raw": pf["pressure"], "p_nodal": smoothed_sample_pressure(cs, last.x)}


def hertz_summary(run: RunResult, oracle: Optional[HertzOracle] = None) -> HertzSummary:
    oracle = oracle or HertzOracle()
    last = run.steps[-1]
    cs = last.contact_states[0]
    prof = hertz_profile(run)
    raw = _metrics(prof["r"], prof["p_raw"], oracle)
    nodes, pn, _ = nodal_contact_pressure(cs, last.x)
    rn = np.hypot(last.x[nodes, 0], last.x[nodes, 1])
    nodal = _metrics(rn, pn, oracle)
    positive = []
    for step in run.steps:
        s = step.contact_states[0]
        positive.append(int(np.sum(contact_pressure_field(s, step.x)["pressure"] > 0)))
    force = contact_normal_force(cs, last.x)["total"]
    tets = tuple(run.scene.meshes[b.name].n_tets for b in run.scene.config.bodies)
    return HertzSummary(oracle.p0, oracle.alpha_H, *nodal[:5], *raw[:5], float(force),
                        float(np.linalg.norm(run.scene.applied_force)), tets, tuple(positive))


def run_hertz(refine: float = 1.0, load_steps: int = 10, kappa: float = KAPPA,
              out_dir: Optional[str] = None, seq: bool = False) -> Tuple[HertzSummary, RunResult]:
    """Solve the Hertz model and compare with :class:`HertzOracle`.

    With ``out_dir`` the final-step meshes, the contact CSV, a
    ``hertz_pressure.csv`` profile ``(r, p_raw, p_nodal, p_analytic)`` sorted
    by ``r`` and ``report.txt`` (including the summary) are written.
    """
    cfg = hertz_config(refine, load_steps, kappa, out_dir or "out/hertz")
    oracle = HertzOracle()
    holder = {}

    def extra(run):
        summ = holder["summary"] = hertz_summary(run, oracle)
        return [("hertz.load_interpretation", "q=Q (uniform top pressure, total force Q*pi*R^2)"),
                ("hertz.E_star", oracle.E_star)] + summ.items()

    run = run_scene(cfg, out_dir=out_dir, seq=seq, write=out_dir is not None, extra_report=extra)
    summ = holder.get("summary") or hertz_summary(run, oracle)
    if out_dir is not None:
        prof = hertz_profile(run)
        o = np.argsort(prof["r"], kind="stable")
        path = os.path.join(out_dir, "hertz_pressure.csv")
        write_csv(path, ["r", "p_raw", "p_nodal", "p_analytic"],
                  [prof["r"][o], prof["p_raw"][o], prof["p_nodal"][o], oracle.p(prof["r"][o])])
        run.files.append(path)
    return summ, run
