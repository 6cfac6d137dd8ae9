"""Line-oriented scene files.

A scene is a sequence of sections. ``[solver]`` and ``[output]`` appear at
most once; ``[body NAME]``, ``[bc NAME]``, ``[load NAME]``,
``[body_force NAME]`` and ``[contact NAME]`` may repeat. Each section holds
``key = value`` lines; ``#`` starts a comment. Vectors are comma-separated.

Example::

    [body bottom]
    generator = block
    size = 1, 1, 0.5
    divisions = 5, 5, 2
    E = 1000
    nu = 0

    [bc clamp]
    body = bottom
    box_min = -inf, -inf, -1e-9
    box_max = inf, inf, 1e-9
    axes = xyz
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

__all__ = ["SceneError", "Section", "SceneConfig", "parse_scene", "parse_scene_text", "SCHEMA"]


class SceneError(ValueError):
    """Invalid scene file; the message names the line and key."""


def _vec(n):
    def conv(s):
        try:
            v = tuple(float(t) for t in s.split(","))
        except ValueError as exc:
            raise ValueError(f"expected {n} comma-separated numbers") from exc
        if len(v) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        return v
    conv.__name__ = f"vec{n}"
    return conv


def _ivec3(s):
    v = _vec(3)(s)
    if any(x != int(x) for x in v):
        raise ValueError("expected three integers")
    return tuple(int(x) for x in v)


def _pos(s):
    v = float(s)
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _nonneg(s):
    v = float(s)
    if not v >= 0:
        raise ValueError("must be non-negative")
    return v


def _int_pos(s):
    v = int(s)
    if v < 1:
        raise ValueError("must be an integer >= 1")
    return v


def _opt_pos(s):
    return None if s.strip() == "auto" else _pos(s)


def _bool(s):
    t = s.strip().lower()
    if t in ("yes", "true", "on", "1"):
        return True
    if t in ("no", "false", "off", "0"):
        return False
    raise ValueError("expected yes/no")


def _axes(s):
    t = s.strip().lower()
    if not t or any(c not in "xyz" for c in t) or len(set(t)) != len(t):
        raise ValueError("expected a subset of xyz")
    return t


def _floats(s):
    return tuple(float(t) for t in s.split(","))


def _kappa_rule(s):
    t = s.strip()
    if t in ("compensate", "mean-edge"):
        return t
    return _nonneg(t)


def _direction(s):
    t = s.strip()
    if t == "inward-normal":
        return t
    return _vec(3)(t)


def _choice(*opts):
    def conv(s):
        t = s.strip()
        if t not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return t
    return conv


def _text(s):
    return s.strip()


INF = (math.inf, math.inf, math.inf)
NINF = (-math.inf, -math.inf, -math.inf)

# key -> (converter, default); default None with required=True below
SCHEMA: Dict[str, Dict[str, Tuple[Any, Any]]] = {
    "solver": {
        "load_steps": (_int_pos, 1),
        "newton_tol": (_opt_pos, None),
        "max_newton_iters": (_int_pos, 100),
        "ls_shrink": (float, 0.5),
        "ls_max_halvings": (_int_pos, 40),
        "linear_tol": (_pos, 1e-10),
        "headroom": (_pos, 0.5),
        "rebuild_distance": (_pos, 0.5),
        "sampling_positions": (_choice("initial", "current"), "initial"),
    },
    "output": {
        "dir": (_text, "out"),
        "vtk": (_bool, True),
        "csv": (_bool, True),
        "every_step": (_bool, True),
    },
    "body": {
        "generator": (_choice("block", "file", "hertz-block", "hertz-hemisphere"), "block"),
        "size": (_vec(3), (1.0, 1.0, 1.0)),
        "divisions": (_ivec3, (1, 1, 1)),
        "origin": (_vec(3), (0.0, 0.0, 0.0)),
        "node": (_text, ""),
        "ele": (_text, ""),
        "radius": (_pos, 0.05),
        "height": (_pos, 0.06),
        "gap": (_pos, 5e-5),
        "grading": (_floats, (4.0,)),
        "E": (_pos, None),
        "nu": (float, None),
    },
    "bc": {
        "body": (_text, ""),
        "box_min": (_vec(3), NINF),
        "box_max": (_vec(3), INF),
        "axes": (_axes, "xyz"),
        "values": (_floats, None),
    },
    "load": {
        "body": (_text, None),
        "magnitude": (float, None),
        "direction": (_direction, "inward-normal"),
        "box_min": (_vec(3), NINF),
        "box_max": (_vec(3), INF),
        "normal": (_vec(3), None),
        "cone": (float, 0.9),
    },
    "body_force": {
        "body": (_text, None),
        "density": (_vec(3), None),
    },
    "contact": {
        "slave": (_text, None),
        "master": (_text, None),
        "slave_box_min": (_vec(3), NINF),
        "slave_box_max": (_vec(3), INF),
        "slave_normal": (_vec(3), None),
        "slave_cone": (float, 0.9),
        "master_box_min": (_vec(3), NINF),
        "master_box_max": (_vec(3), INF),
        "master_normal": (_vec(3), None),
        "master_cone": (float, 0.9),
        "kappa": (_pos, 1e6),
        "kappa_edge": (_kappa_rule, "compensate"),
        "kappa_point": (_kappa_rule, "compensate"),
        "eps_max": (_pos, 1e-3),
        "delta_T": (_pos, 0.1),
        "delta_e": (_pos, 0.1),
        "detection_radius": (_opt_pos, None),
        "quad_order_face": (_int_pos, 2),
        "quad_order_edge": (_int_pos, 2),
    },
}
SINGLETONS = ("solver", "output")
REQUIRED = {"body": ("E", "nu"), "load": ("body", "magnitude"), "body_force": ("body", "density"),
            "contact": ("slave", "master")}


@dataclass
class Section:
    kind: str
    name: str
    values: Dict[str, Any]
    line: int
    key_lines: Dict[str, int] = field(default_factory=dict)
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]


@dataclass
class SceneConfig:
    """Validated scene: every section with defaults filled in."""

    solver: Section
    output: Section
    bodies: List[Section]
    bcs: List[Section]
    loads: List[Section]
    body_forces: List[Section]
    contacts: List[Section]
    source: str = "<memory>"

    def body(self, name) -> Section:
        return next(b for b in self.bodies if b.name == name)

    def sections(self) -> List[Section]:
        return [self.solver, self.output, *self.bodies, *self.bcs, *self.loads, *self.body_forces,
                *self.contacts]

    def echo(self) -> List[Tuple[str, str]]:
        """``(key, value)`` pairs for every resolved setting, defaults included."""
        out = []
        for s in self.sections():
            prefix = s.kind if s.kind in SINGLETONS else f"{s.kind}.{s.name}"
            for k in SCHEMA[s.kind]:
                out.append((f"{prefix}.{k}", _fmt(s.values[k])))
        return out

    def to_text(self) -> str:
        lines = []
        for s in self.sections():
            lines.append(f"[{s.kind}]" if s.kind in SINGLETONS else f"[{s.kind} {s.name}]")
            for k in SCHEMA[s.kind]:
                v = s.values[k]
                if v is None:
                    v = "auto" if SCHEMA[s.kind][k][0] is _opt_pos else None
                if v is not None and v != "":
                    lines.append(f"{k} = {_fmt(v)}")
            lines.append("")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "auto"
    return str(v)


def parse_scene(path) -> SceneConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise SceneError(f"cannot read scene file {path}: {exc.strerror}") from exc
    return parse_scene_text(text, str(path))


def parse_scene_text(text: str, source: str = "<memory>") -> SceneConfig:
    sections: List[Section] = []
    cur: Optional[Section] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise SceneError(f"{where}: malformed section header {line!r}")
            parts = line[1:-1].split()
            if not parts or parts[0] not in SCHEMA:
                raise SceneError(f"{where}: unknown section {line!r}")
            kind = parts[0]
            if kind in SINGLETONS:
                if len(parts) != 1:
                    raise SceneError(f"{where}: section [{kind}] takes no name")
                if any(s.kind == kind for s in sections):
                    raise SceneError(f"{where}: duplicate section [{kind}]")
                name = kind
            else:
                if len(parts) != 2:
                    raise SceneError(f"{where}: section [{kind}] needs exactly one name")
                name = parts[1]
                if any(s.kind == kind and s.name == name for s in sections):
                    raise SceneError(f"{where}: duplicate {kind} name {name!r}")
            cur = Section(kind, name, {}, lineno)
            sections.append(cur)
            continue
        if cur is None:
            raise SceneError(f"{where}: key outside of any section")
        if "=" not in line:
            raise SceneError(f"{where}: expected 'key = value'")
        key, val = (t.strip() for t in line.split("=", 1))
        schema = SCHEMA[cur.kind]
        if key not in schema:
            raise SceneError(f"{where}: unknown key {key!r} in [{cur.kind}]")
        if key in cur.explicit:
            raise SceneError(f"{where}: duplicate key {key!r}")
        try:
            cur.values[key] = schema[key][0](val)
        except ValueError as exc:
            raise SceneError(f"{where}: invalid value for {key!r}: {exc}") from exc
        cur.explicit.add(key)
        cur.key_lines[key] = lineno
    return _validate(sections, source)


def _fill(sec: Section, source):
    for key, (conv, default) in SCHEMA[sec.kind].items():
        if key not in sec.values:
            if key in REQUIRED.get(sec.kind, ()):
                raise SceneError(f"{source}:{sec.line}: [{sec.kind} {sec.name}] is missing required key {key!r}")
            sec.values[key] = default


def _validate(sections: List[Section], source) -> SceneConfig:
    for s in sections:
        _fill(s, source)
    get = lambda kind: [s for s in sections if s.kind == kind]
    solver = next(iter(get("solver")), None) or Section("solver", "solver", {}, 0)
    output = next(iter(get("output")), None) or Section("output", "output", {}, 0)
    _fill(solver, source)
    _fill(output, source)
    bodies = get("body")
    if not bodies:
        raise SceneError(f"{source}: scene defines no [body] section")
    names = {b.name for b in bodies}

    def line_of(sec, key):
        return sec.key_lines.get(key, sec.line)

    for b in bodies:
        nu = b["nu"]
        if not -1 < nu < 0.5 - 1e-6:
            raise SceneError(f"{source}:{line_of(b, 'nu')}: key 'nu' of body {b.name!r} must lie in (-1, 0.5)")
        if b["generator"] == "file" and not (b["node"] and b["ele"]):
            raise SceneError(f"{source}:{b.line}: file body {b.name!r} needs 'node' and 'ele'")
        if b["generator"] == "block" and min(b["divisions"]) < 1:
            raise SceneError(f"{source}:{line_of(b, 'divisions')}: divisions must be >= 1")
    for kind, keys in (("bc", ("body",)), ("load", ("body",)), ("body_force", ("body",)),
                       ("contact", ("slave", "master"))):
        for s in get(kind):
            for k in keys:
                ref = s[k]
                if ref and ref not in names:
                    raise SceneError(f"{source}:{line_of(s, k)}: key {k!r} of [{kind} {s.name}] "
                                     f"references unknown body {ref!r}")
    for c in get("contact"):
        if c["slave"] == c["master"]:
            raise SceneError(f"{source}:{line_of(c, 'master')}: contact {c.name!r} needs two different bodies")
        if not 0 < c["delta_T"] <= 1 / 3:
            raise SceneError(f"{source}:{line_of(c, 'delta_T')}: delta_T must lie in (0, 1/3]")
        if not 0 < c["delta_e"] <= 0.5:
            raise SceneError(f"{source}:{line_of(c, 'delta_e')}: delta_e must lie in (0, 0.5]")
        for k in ("quad_order_face",):
            if c[k] > 4:
                raise SceneError(f"{source}:{line_of(c, k)}: {k} must be 1-4")
    for bc in get("bc"):
        vals = bc["values"]
        if vals is not None and len(vals) != len(bc["axes"]):
            raise SceneError(f"{source}:{line_of(bc, 'values')}: [bc {bc.name}] needs one value per axis")
        if vals is None:
            bc.values["values"] = tuple(0.0 for _ in bc["axes"])
    if not 0 < solver["ls_shrink"] < 1:
        raise SceneError(f"{source}:{line_of(solver, 'ls_shrink')}: ls_shrink must lie in (0, 1)")
    if (get("load") or get("body_force")) and not get("bc"):
        raise SceneError(f"{source}: a loaded scene needs at least one [bc] section")
    return SceneConfig(solver, output, bodies, get("bc"), get("load"), get("body_force"), get("contact"), source)
