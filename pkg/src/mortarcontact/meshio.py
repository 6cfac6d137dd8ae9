"""Text mesh formats: TetGen ``.node``/``.ele``, Wavefront OBJ, legacy VTK.

OBJ files are kept as a list of raw lines so that texture coordinates,
normals, groups and material statements survive a read/modify/write cycle;
only ``v`` records are rewritten.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .geometry import GeometryError, SurfaceMesh, TetMesh

__all__ = [
    "MeshFormatError",
    "read_node",
    "read_ele",
    "load_tet_mesh",
    "save_tet_mesh",
    "ObjMesh",
    "read_obj",
    "write_obj",
    "write_vtk_unstructured",
]


class MeshFormatError(GeometryError):
    pass


def _data_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _xyz(p) -> str:
    """Shortest round-tripping text of a 3D point."""
    return " ".join(repr(float(c)) for c in p[:3])


def read_node(path):
    """Return ``(points, first_index)``."""
    lines = _data_lines(path)
    try:
        lineno, head = next(lines)
        n, dim, nattr, nmark = (int(v) for v in (head + ["0", "0"])[:4])
    except (StopIteration, ValueError) as exc:
        raise MeshFormatError(f"{path}: malformed node header") from exc
    if dim != 3:
        raise MeshFormatError(f"{path}: expected dimension 3, got {dim}")
    pts = np.empty((n, 3))
    first = None
    for row in range(n):
        try:
            lineno, tok = next(lines)
            idx = int(tok[0])
            pts[row] = [float(v) for v in tok[1:4]]
        except StopIteration as exc:
            raise MeshFormatError(f"{path}: header declares {n} nodes, found {row}") from exc
        except (ValueError, IndexError) as exc:
            raise MeshFormatError(f"{path}:{lineno}: malformed node record") from exc
        if first is None:
            first = idx
        elif idx != first + row:
            raise MeshFormatError(f"{path}:{lineno}: node numbering is not consecutive")
    return pts, (0 if first is None else first)


def read_ele(path, first_index=0):
    lines = _data_lines(path)
    try:
        lineno, head = next(lines)
        n, npe = int(head[0]), int(head[1])
    except (StopIteration, ValueError, IndexError) as exc:
        raise MeshFormatError(f"{path}: malformed element header") from exc
    if npe != 4:
        raise MeshFormatError(f"{path}: only 4-node tetrahedra are supported, got {npe}")
    tets = np.empty((n, 4), dtype=np.int64)
    for row in range(n):
        try:
            lineno, tok = next(lines)
            tets[row] = [int(v) for v in tok[1:5]]
        except StopIteration as exc:
            raise MeshFormatError(f"{path}: header declares {n} elements, found {row}") from exc
        except (ValueError, IndexError) as exc:
            raise MeshFormatError(f"{path}:{lineno}: malformed element record") from exc
    return tets - first_index


def load_tet_mesh(node_path, ele_path) -> TetMesh:
    """Read a TetGen mesh; numbering base follows the first node index."""
    pts, base = read_node(node_path)
    tets = read_ele(ele_path, base)
    bad = np.flatnonzero((tets < 0).any(1) | (tets >= len(pts)).any(1))
    if bad.size:
        raise MeshFormatError(f"{ele_path}: element {int(bad[0])} references a node outside "
                              f"the {len(pts)} nodes of {node_path}")
    return TetMesh(pts, tets)


def save_tet_mesh(mesh: TetMesh, node_path, ele_path, first_index=0):
    with open(node_path, "w") as fh:
        fh.write(f"{mesh.n_vertices} 3 0 0\n")
        for i, p in enumerate(mesh.vertices):
            fh.write(f"{i + first_index} {_xyz(p)}\n")
    with open(ele_path, "w") as fh:
        fh.write(f"{mesh.n_tets} 4 0\n")
        for i, t in enumerate(mesh.tets + first_index):
            fh.write(f"{i + first_index} {t[0]} {t[1]} {t[2]} {t[3]}\n")


@dataclass
class ObjMesh:
    """Triangle surface read from OBJ plus the untouched non-vertex lines."""

    surface: SurfaceMesh
    lines: List[str] = field(default_factory=list)
    vertex_lines: List[int] = field(default_factory=list)

    @property
    def vertices(self):
        return self.surface.vertices


def read_obj(path) -> ObjMesh:
    verts, tris, vline = [], [], []
    with open(path) as fh:
        lines = fh.read().splitlines()
    for lineno, raw in enumerate(lines):
        tok = raw.split()
        if not tok:
            continue
        if tok[0] == "v":
            try:
                verts.append([float(t) for t in tok[1:4]])
            except (ValueError, IndexError) as exc:
                raise MeshFormatError(f"{path}:{lineno + 1}: malformed vertex") from exc
            vline.append(lineno)
        elif tok[0] == "f":
            try:
                ids = [int(t.split("/")[0]) for t in tok[1:]]
            except ValueError as exc:
                raise MeshFormatError(f"{path}:{lineno + 1}: malformed face") from exc
            ids = [i - 1 if i > 0 else len(verts) + i for i in ids]
            # fan-split polygons
            for k in range(1, len(ids) - 1):
                tris.append([ids[0], ids[k], ids[k + 1]])
    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
        raise MeshFormatError(f"{path}: face references a missing vertex")
    surf = SurfaceMesh(np.array(verts).reshape(-1, 3), tris)
    return ObjMesh(surf, lines, vline)


def write_obj(path, mesh, positions: Optional[np.ndarray] = None):
    """Write an OBJ; ``mesh`` may be an :class:`ObjMesh` or a SurfaceMesh."""
    if isinstance(mesh, ObjMesh):
        pos = mesh.vertices if positions is None else np.asarray(positions)
        out = list(mesh.lines)
        for i, ln in enumerate(mesh.vertex_lines):
            p = pos[i]
            out[ln] = f"v {_xyz(p)}"
        text = "\n".join(out) + "\n"
    else:
        pos = mesh.vertices if positions is None else np.asarray(positions)
        rows = [f"v {_xyz(p)}" for p in pos]
        rows += [f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}" for t in mesh.triangles]
        text = "\n".join(rows) + "\n"
    with open(path, "w") as fh:
        fh.write(text)


_VTK_TET = 10
_VTK_TRI = 5


def write_vtk_unstructured(path, points, cells, cell_data: Optional[Dict[str, np.ndarray]] = None,
                           point_data: Optional[Dict[str, np.ndarray]] = None, title="mesh"):
    """Legacy ASCII VTK unstructured grid of tets or triangles.

    Array values are written with ``repr`` so files round-trip exactly.
    """
    points = np.asarray(points, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    npc = cells.shape[1]
    ctype = {4: _VTK_TET, 3: _VTK_TRI}[npc]
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {len(points)} double"]
    out += [_xyz(p) for p in points]
    out.append(f"CELLS {len(cells)} {len(cells) * (npc + 1)}")
    out += [f"{npc} " + " ".join(str(i) for i in c) for c in cells]
    out.append(f"CELL_TYPES {len(cells)}")
    out += [str(ctype)] * len(cells)
    for header, data, n in (("CELL_DATA", cell_data, len(cells)), ("POINT_DATA", point_data, len(points))):
        if not data:
            continue
        out.append(f"{header} {n}")
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                out += [repr(float(v)) for v in arr]
            else:
                out.append(f"VECTORS {name} double")
                out += [" ".join(repr(float(v)) for v in row) for row in arr]
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
