"""Replay simulation-surface frames on a detached visual mesh."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..geometry import GeometryError
from ..mapper import precompute_embedding, update_visual_positions
from ..meshio import read_obj, write_obj
from .runner import write_report

__all__ = ["EmbedReport", "run_embed"]


@dataclass
class EmbedReport:
    """Result of :func:`run_embed`.

    ``rest_error`` is the largest replay error on the rest surface divided by
    the visual bounding-box diagonal.
    """

    n_visual: int
    n_frames: int
    rest_error: float
    frames: List[np.ndarray] = field(default_factory=list)
    files: List[str] = field(default_factory=list)

    def items(self):
        return [("embed.visual_vertices", self.n_visual), ("embed.frames", self.n_frames),
                ("embed.rest_reproduction_error", self.rest_error)]


def run_embed(rest_path, visual_path, frame_paths: Sequence, out_dir: Optional[str] = None,
              brute_force: bool = False, extra_items=()) -> EmbedReport:
    """Embed ``visual_path`` on ``rest_path`` once and replay every frame.

    All meshes are OBJ triangle surfaces. Frames must have the rest
    surface's vertex count and triangle list; otherwise a
    :class:`~mortarcontact.geometry.GeometryError` names the offending file.
    Deformed visual meshes go to ``out_dir/frame_NNN.obj`` with every
    non-vertex line of the input kept verbatim.
    """
    rest = read_obj(rest_path)
    vis = read_obj(visual_path)
    emb = precompute_embedding(vis.vertices, rest.surface)
    back = update_visual_positions(emb, rest.vertices, rest.surface)
    p = vis.vertices
    diag = float(np.linalg.norm(p.max(0) - p.min(0))) if len(p) else 1.0
    rest_err = float(np.abs(back - p).max() / (diag or 1.0)) if len(p) else 0.0
    rep = EmbedReport(len(p), len(frame_paths), rest_err)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    for i, fp in enumerate(frame_paths):
        fr = read_obj(fp)
        if fr.vertices.shape != rest.vertices.shape or not np.array_equal(fr.surface.triangles,
                                                                           rest.surface.triangles):
            raise GeometryError(f"frame {fp} does not share the rest surface's topology")
        moved = update_visual_positions(emb, fr.vertices, rest.surface)
        rep.frames.append(moved)
        if out_dir is not None:
            path = os.path.join(out_dir, f"frame_{i:03d}.obj")
            write_obj(path, vis, moved)
            rep.files.append(path)
    if out_dir is not None:
        path = os.path.join(out_dir, "report.txt")
        write_report(path, [("rest", str(rest_path)), ("visual", str(visual_path))]
                     + [(f"frame.{i:03d}", str(f)) for i, f in enumerate(frame_paths)]
                     + rep.items() + list(extra_items))
        rep.files.append(path)
    return rep
