"""Scenario configuration: INI parsing, world generators and builtin scenarios.

A scenario file has the sections ``[scenario]``, ``[world]``, ``[agents]``,
``[planner]`` and ``[comm]``; every key is optional and falls back to the
defaults of :class:`PlannerParams` and friends.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mpc_miqp as mpc
from . import swarm_sim as ss
from .errors import ConfigurationError


class ConfigError(ConfigurationError):
    """Malformed scenario text; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line else ""
        super().__init__(where + message)


@dataclass
class WorldSpec:
    generator: str = "empty"
    density: float = 0.1
    densities: tuple = (0.1, 0.2)
    forest_size: tuple = (30.0, 30.0, 20.0)
    forest_center: tuple = (0.0, 0.0, 0.0)
    forest_centers: tuple = ((18.0, 15.0, 0.0), (78.0, 15.0, 0.0))
    cyl_radius: float = 0.15
    wall_x: float = 48.0
    wall_thickness: float = 0.6
    wall_width: float = 30.0
    wall_height: float = 15.0
    wall_center_y: float = 15.0
    openings: int = 11
    opening_size: tuple = (1.5, 1.5)
    opening_z: tuple = (1.0, 4.0)
    cylinders: list = field(default_factory=list)
    boxes: list = field(default_factory=list)


@dataclass
class AgentSpec:
    count: int = 10
    layout: str = "circle"
    radius: float = 10.0
    altitude: float = 2.0
    spacing: float = 3.0
    offset: tuple = (-3.0, 15.0)
    travel: float = 96.0
    spawn_jitter: float = 0.05


@dataclass
class CommSpec:
    latency: tuple = ("fixed", 0.0)
    loss_prob: float = 0.0
    schedule: str = "bernoulli"
    burst_len: int = 5


@dataclass
class ScenarioConfig:
    name: str = "custom"
    mode: str = "privileged"
    seed: int = 0
    max_sim_time: float = 40.0
    world: WorldSpec = field(default_factory=WorldSpec)
    agents: AgentSpec = field(default_factory=AgentSpec)
    planner: dict = field(default_factory=dict)
    comm: CommSpec = field(default_factory=CommSpec)

    def planner_params(self) -> ss.PlannerParams:
        kw = dict(self.planner)
        weights = {k: kw.pop(k) for k in ("R_x", "R_N", "R_u") if k in kw}
        sensor = {k: kw.pop(k) for k in ("sensor_range", "sensor_res_deg") if k in kw}
        if "z_offset" not in kw and "r_agent" in kw:
            kw["z_offset"] = kw["r_agent"]
        p = ss.PlannerParams(**kw)
        if weights:
            base = mpc.CostWeights()
            p.weights = mpc.CostWeights(weights.get("R_x", base.R_x), weights.get("R_N", base.R_N),
                                        weights.get("R_u", base.R_u))
        if sensor:
            p.sensor = ss.SensorModel(sensor.get("sensor_range", 15.0),
                                      math.radians(sensor.get("sensor_res_deg", 0.5)))
        return p

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return dataclasses.replace(self, seed=int(seed))

    def with_mode(self, mode: str) -> "ScenarioConfig":
        if mode not in ("privileged", "fov"):
            raise ConfigError(f"unknown mode {mode!r}")
        return dataclasses.replace(self, mode=mode)


# ----------------------------------------------------------------------------
# world generation

def _forest(rng, center, size, density, radius) -> list:
    cx, cy, cz = center
    sx, sy, sz = size
    n = int(round(density * sx * sy))
    xs = rng.uniform(cx - sx / 2, cx + sx / 2, n)
    ys = rng.uniform(cy - sy / 2, cy + sy / 2, n)
    zs = rng.uniform(cz - sz / 2, cz + sz / 2, n)
    return [ss.Cylinder((x, y), radius, z - sz / 2, z + sz / 2) for x, y, z in zip(xs, ys, zs)]


def _wall(spec: WorldSpec, rng, z_floor: float) -> list:
    """Slab split into boxes around ``openings`` evenly spaced rectangular holes."""
    x0 = spec.wall_x - spec.wall_thickness / 2
    x1 = spec.wall_x + spec.wall_thickness / 2
    y0 = spec.wall_center_y - spec.wall_width / 2
    y1 = spec.wall_center_y + spec.wall_width / 2
    ow, oh = spec.opening_size
    n = spec.openings
    if n * ow > spec.wall_width:
        raise ConfigurationError("wall openings do not fit in the wall width")
    pitch = spec.wall_width / max(n, 1)
    boxes = []
    y = y0
    for i in range(n):
        oy0 = y0 + pitch * (i + 0.5) - ow / 2
        oy1 = oy0 + ow
        oz0 = float(rng.uniform(spec.opening_z[0], spec.opening_z[1]))
        oz1 = oz0 + oh
        if oy0 > y:
            boxes.append(ss.Box((x0, y, z_floor), (x1, oy0, spec.wall_height)))
        boxes.append(ss.Box((x0, oy0, z_floor), (x1, oy1, oz0)))
        if oz1 < spec.wall_height:
            boxes.append(ss.Box((x0, oy0, oz1), (x1, oy1, spec.wall_height)))
        y = oy1
    if y < y1:
        boxes.append(ss.Box((x0, y, z_floor), (x1, y1, spec.wall_height)))
    return boxes


def gen_world(spec: WorldSpec, seed: int) -> ss.World:
    """Obstacle layout for ``spec``; identical for identical seeds."""
    if spec.density < 0 or any(d < 0 for d in spec.densities):
        raise ConfigurationError("forest density must be non-negative")
    rng = np.random.default_rng([int(seed), 1])
    cyl = [ss.Cylinder(c[:2], c[2], c[3], c[4]) for c in spec.cylinders]
    boxes = [ss.Box(b[:3], b[3:]) for b in spec.boxes]
    if spec.generator == "circle_forest":
        cyl += _forest(rng, spec.forest_center, spec.forest_size, spec.density, spec.cyl_radius)
    elif spec.generator == "linear_forest":
        for c, d in zip(spec.forest_centers, spec.densities):
            cyl += _forest(rng, c, spec.forest_size, d, spec.cyl_radius)
        boxes += _wall(spec, rng, -spec.forest_size[2])
    elif spec.generator != "empty":
        raise ConfigurationError(f"unknown world generator {spec.generator!r}")
    pts = [np.r_[c.center - c.radius, c.z_lo] for c in cyl] + [b.lo for b in boxes]
    pts_hi = [np.r_[c.center + c.radius, c.z_hi] for c in cyl] + [b.hi for b in boxes]
    lo = np.array([-60.0, -60.0, -30.0])
    hi = np.array([160.0, 60.0, 30.0])
    if pts:
        lo = np.minimum(lo, np.min(pts, axis=0) - 1)
        hi = np.maximum(hi, np.max(pts_hi, axis=0) + 1)
    return ss.World(cyl, boxes, lo, hi)


def layout_agents(spec: AgentSpec, seed: int):
    """Spawn and goal positions; spawns get a small seeded jitter to break symmetry."""
    n = spec.count
    if n < 1:
        raise ConfigurationError("need at least one agent")
    rng = np.random.default_rng([int(seed), 2])
    if spec.layout == "circle":
        ang = 2 * np.pi * np.arange(n) / n
        spawn = np.stack([spec.radius * np.cos(ang), spec.radius * np.sin(ang),
                          np.full(n, spec.altitude)], axis=1)
        goal = np.stack([-spawn[:, 0], -spawn[:, 1], spawn[:, 2]], axis=1)
    elif spec.layout == "line":
        ys = spec.offset[1] + spec.spacing * (np.arange(n) - (n - 1) / 2)
        spawn = np.stack([np.full(n, spec.offset[0]), ys, np.full(n, spec.altitude)], axis=1)
        goal = spawn + np.array([spec.travel, 0.0, 0.0])
    elif spec.layout == "headon":
        # pairs facing each other across the origin, stacked in y
        half = spec.radius
        rows = []
        for i in range(n):
            y = spec.spacing * ((i // 2) - (n // 2 - 1) / 2) if n > 1 else 0.0
            side = 1.0 if i % 2 == 0 else -1.0
            rows.append(([-side * half, y, spec.altitude], [side * half, y, spec.altitude]))
        spawn = np.array([r[0] for r in rows], float)
        goal = np.array([r[1] for r in rows], float)
    else:
        raise ConfigurationError(f"unknown agent layout {spec.layout!r}")
    spawn = spawn + rng.uniform(-spec.spawn_jitter, spec.spawn_jitter, spawn.shape)
    return spawn, goal


def build_simulation(cfg: ScenarioConfig, budgeted: bool = False,
                     record_corridors: bool = False) -> ss.Simulation:
    params = cfg.planner_params()
    world = gen_world(cfg.world, cfg.seed)
    spawn, goal = layout_agents(cfg.agents, cfg.seed)
    c = cfg.comm
    comm = ss.CommModel(c.latency, c.loss_prob, int(cfg.seed), c.schedule, c.burst_len)
    return ss.Simulation(world, spawn, goal, params, comm, mode=cfg.mode,
                         max_time=cfg.max_sim_time, budgeted=budgeted,
                         record_corridors=record_corridors)


# ----------------------------------------------------------------------------
# INI parsing

_PLANNER_FLOATS = {"h", "v_samp_min", "v_samp_max", "s_d", "s_o", "d_pot_max", "d_search",
                   "r_agent", "z_offset", "a_max", "j_max", "T_map", "T_path", "T_traj",
                   "voxel_size", "w_pot", "comm_range", "solver_budget", "sensor_range",
                   "sensor_res_deg"}
_PLANNER_INTS = {"N", "P_hor", "i_path_start", "max_nodes"}
_PLANNER_VECS = {"dims": int, "R_x": float, "R_N": float, "R_u": float}


_SECTION_KEYS = {
    "scenario": {"name", "mode", "seed", "max_sim_time"},
    "world": {"generator", "density", "densities", "forest_size", "forest_center",
              "forest_centers", "cyl_radius", "wall_x", "wall_thickness", "wall_width",
              "wall_height", "wall_center_y", "openings", "opening_size", "opening_z"},
    "agents": {"count", "layout", "radius", "altitude", "spacing", "offset", "travel",
               "spawn_jitter"},
    "comm": {"latency", "loss_prob", "schedule", "burst_len"},
}


def _key_lines(text: str) -> dict:
    out = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
        elif section and line and line[0] not in "#;" and ("=" in line or ":" in line):
            key = line.split("=", 1)[0].split(":", 1)[0].strip()
            out[(section, key)] = no
    return out


class _Reader:
    def __init__(self, cp, lines):
        self.cp = cp
        self.lines = lines

    def err(self, section, key, msg):
        return ConfigError(f"[{section}] {key}: {msg}", self.lines.get((section, key)))

    def get(self, section, key, conv, default):
        if not self.cp.has_option(section, key):
            return default
        raw = self.cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise self.err(section, key, f"cannot parse {raw!r} ({exc})") from None

    def vec(self, section, key, typ, default, n=None):
        def conv(raw):
            vals = tuple(typ(v) for v in raw.replace(",", " ").split())
            if n is not None and len(vals) != n:
                raise ValueError(f"expected {n} values")
            return vals
        return self.get(section, key, conv, default)


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def parse_config(text: str, name: str = "custom") -> ScenarioConfig:
    """Parse scenario INI text; raises :class:`ConfigError` with a line number."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"syntax error: {exc.errors[0][1] if exc.errors else exc}",
                          line) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)
    r = _Reader(cp, lines)
    known = {"scenario", "world", "agents", "planner", "comm"}
    for s in cp.sections():
        if s not in known:
            raise ConfigError(f"unknown section [{s}]", None)
        if s in _SECTION_KEYS:
            for key in cp.options(s):
                if key not in _SECTION_KEYS[s] and not (
                        s == "world" and key.startswith(("cylinder", "box"))):
                    raise r.err(s, key, f"unknown key in [{s}]")
    cfg = ScenarioConfig(name=name)
    sc = "scenario"
    cfg.name = r.get(sc, "name", str, name)
    cfg.mode = r.get(sc, "mode", str, cfg.mode)
    if cfg.mode not in ("privileged", "fov"):
        raise r.err(sc, "mode", f"unknown mode {cfg.mode!r}")
    cfg.seed = r.get(sc, "seed", int, 0)
    cfg.max_sim_time = r.get(sc, "max_sim_time", float, cfg.max_sim_time)
    if cfg.max_sim_time <= 0:
        raise r.err(sc, "max_sim_time", "must be positive")

    w = WorldSpec()
    ws = "world"
    w.generator = r.get(ws, "generator", str, w.generator)
    if w.generator not in ("empty", "circle_forest", "linear_forest"):
        raise r.err(ws, "generator", f"unknown generator {w.generator!r}")
    w.density = r.get(ws, "density", float, w.density)
    w.densities = r.vec(ws, "densities", float, w.densities)
    w.forest_size = r.vec(ws, "forest_size", float, w.forest_size, 3)
    w.forest_center = r.vec(ws, "forest_center", float, w.forest_center, 3)
    if cp.has_option(ws, "forest_centers"):
        flat = r.vec(ws, "forest_centers", float, ())
        if len(flat) % 3:
            raise r.err(ws, "forest_centers", "expected triples")
        w.forest_centers = tuple(tuple(flat[i:i + 3]) for i in range(0, len(flat), 3))
    w.cyl_radius = r.get(ws, "cyl_radius", float, w.cyl_radius)
    for k in ("wall_x", "wall_thickness", "wall_width", "wall_height", "wall_center_y"):
        setattr(w, k, r.get(ws, k, float, getattr(w, k)))
    w.openings = r.get(ws, "openings", int, w.openings)
    w.opening_size = r.vec(ws, "opening_size", float, w.opening_size, 2)
    w.opening_z = r.vec(ws, "opening_z", float, w.opening_z, 2)
    if cp.has_section(ws):
        for key in cp.options(ws):
            if key.startswith("cylinder"):
                w.cylinders.append(r.vec(ws, key, float, None, 5))
            elif key.startswith("box"):
                w.boxes.append(r.vec(ws, key, float, None, 6))
    if w.density < 0 or any(d < 0 for d in w.densities):
        raise r.err(ws, "density", "must be non-negative")
    if w.cyl_radius <= 0:
        raise r.err(ws, "cyl_radius", "must be positive")
    cfg.world = w

    a = AgentSpec()
    asec = "agents"
    a.count = r.get(asec, "count", int, a.count)
    if a.count < 1:
        raise r.err(asec, "count", "must be at least 1")
    a.layout = r.get(asec, "layout", str, a.layout)
    if a.layout not in ("circle", "line", "headon"):
        raise r.err(asec, "layout", f"unknown layout {a.layout!r}")
    for k in ("radius", "altitude", "spacing", "travel", "spawn_jitter"):
        setattr(a, k, r.get(asec, k, float, getattr(a, k)))
    a.offset = r.vec(asec, "offset", float, a.offset, 2)
    if a.radius <= 0 or a.spacing <= 0 or a.spawn_jitter < 0:
        raise ConfigError("[agents] radius and spacing must be positive, jitter non-negative",
                          lines.get((asec, "radius")))
    cfg.agents = a

    planner = {}
    ps = "planner"
    if cp.has_section(ps):
        for key in cp.options(ps):
            if key in _PLANNER_FLOATS:
                planner[key] = r.get(ps, key, float, None)
            elif key in _PLANNER_INTS:
                planner[key] = r.get(ps, key, int, None)
            elif key in _PLANNER_VECS:
                planner[key] = r.vec(ps, key, _PLANNER_VECS[key], None,
                                     3 if key in ("dims", "R_u") else 9)
            else:
                raise r.err(ps, key, "unknown planner parameter")
    cfg.planner = planner

    c = CommSpec()
    cs = "comm"
    if cp.has_option(cs, "latency"):
        parts = cp.get(cs, "latency").split()
        try:
            if parts[0] == "fixed" and len(parts) == 2:
                c.latency = ("fixed", float(parts[1]))
            elif parts[0] == "uniform" and len(parts) == 3:
                c.latency = ("uniform", float(parts[1]), float(parts[2]))
            else:
                raise ValueError("expected 'fixed X' or 'uniform LO HI'")
        except (ValueError, IndexError) as exc:
            raise r.err(cs, "latency", str(exc)) from None
    c.loss_prob = r.get(cs, "loss_prob", float, c.loss_prob)
    c.schedule = r.get(cs, "schedule", str, c.schedule)
    c.burst_len = r.get(cs, "burst_len", int, c.burst_len)
    cfg.comm = c
    # validate the assembled objects so bad values surface at parse time
    try:
        cfg.planner_params()
        ss.CommModel(c.latency, c.loss_prob, 0, c.schedule, c.burst_len)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), None) from None
    except TypeError as exc:
        raise ConfigError(str(exc), None) from None
    return cfg


def load_config(path_or_name: str) -> ScenarioConfig:
    """Builtin scenario by name, or a scenario file path."""
    if path_or_name in BUILTINS:
        return parse_config(BUILTINS[path_or_name], path_or_name)
    p = Path(path_or_name)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path_or_name}: {exc.strerror}") from None
    return parse_config(text, p.stem)


def dump_config(cfg: ScenarioConfig) -> str:
    """Full parameter echo, including resolved planner defaults."""
    p = cfg.planner_params()
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["scenario"] = {"name": cfg.name, "mode": cfg.mode, "seed": str(cfg.seed),
                      "max_sim_time": repr(cfg.max_sim_time)}
    w = cfg.world
    world = {"generator": w.generator, "density": repr(w.density),
             "densities": " ".join(map(repr, w.densities)),
             "forest_size": " ".join(map(repr, w.forest_size)),
             "forest_center": " ".join(map(repr, w.forest_center)),
             "forest_centers": " ".join(repr(v) for c in w.forest_centers for v in c),
             "cyl_radius": repr(w.cyl_radius), "wall_x": repr(w.wall_x),
             "wall_thickness": repr(w.wall_thickness), "wall_width": repr(w.wall_width),
             "wall_height": repr(w.wall_height), "wall_center_y": repr(w.wall_center_y),
             "openings": str(w.openings),
             "opening_size": " ".join(map(repr, w.opening_size)),
             "opening_z": " ".join(map(repr, w.opening_z))}
    for i, c in enumerate(w.cylinders):
        world[f"cylinder{i}"] = " ".join(map(repr, c))
    for i, b in enumerate(w.boxes):
        world[f"box{i}"] = " ".join(map(repr, b))
    cp["world"] = world
    a = cfg.agents
    cp["agents"] = {"count": str(a.count), "layout": a.layout, "radius": repr(a.radius),
                    "altitude": repr(a.altitude), "spacing": repr(a.spacing),
                    "offset": " ".join(map(repr, a.offset)), "travel": repr(a.travel),
                    "spawn_jitter": repr(a.spawn_jitter)}
    planner = {}
    for k in sorted(_PLANNER_FLOATS | _PLANNER_INTS):
        if k in ("sensor_range", "sensor_res_deg"):
            continue
        v = getattr(p, k)
        if v is not None:
            planner[k] = repr(v)
    planner["dims"] = " ".join(map(str, p.dims))
    planner["R_x"] = " ".join(map(repr, p.weights.R_x.tolist()))
    planner["R_N"] = " ".join(map(repr, p.weights.R_N.tolist()))
    planner["R_u"] = " ".join(map(repr, p.weights.R_u.tolist()))
    planner["sensor_range"] = repr(p.sensor.max_range)
    planner["sensor_res_deg"] = repr(math.degrees(p.sensor.angular_res))
    cp["planner"] = planner
    c = cfg.comm
    cp["comm"] = {"latency": " ".join(str(v) for v in c.latency),
                  "loss_prob": repr(c.loss_prob), "schedule": c.schedule,
                  "burst_len": str(c.burst_len)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


BUILTINS = {
    "circle10_empty": """
[scenario]
mode = privileged
max_sim_time = 40
[world]
generator = empty
[agents]
count = 10
layout = circle
radius = 10
[planner]
r_agent = 0.125
a_max = 20
j_max = 30
""",
    "circle10_forest": """
[scenario]
mode = privileged
max_sim_time = 60
[world]
generator = circle_forest
density = 0.1
forest_size = 30 30 20
forest_center = 0 0 0
[agents]
count = 10
layout = circle
radius = 22
[planner]
r_agent = 0.3
a_max = 40
j_max = 80
""",
    "circle6_forest": """
[scenario]
mode = privileged
max_sim_time = 40
[world]
generator = circle_forest
density = 0.1
forest_size = 16 16 20
forest_center = 0 0 0
[agents]
count = 6
layout = circle
radius = 12
[planner]
r_agent = 0.3
a_max = 40
j_max = 80
""",
    "linear10_wall": """
[scenario]
mode = privileged
max_sim_time = 90
[world]
generator = linear_forest
densities = 0.1 0.2
forest_size = 30 30 20
forest_centers = 18 15 0  78 15 0
wall_x = 48
[agents]
count = 10
layout = line
offset = -3 15
spacing = 3
travel = 96
[planner]
r_agent = 0.3
a_max = 40
j_max = 80
""",
    "duo_headon": """
[scenario]
mode = privileged
max_sim_time = 30
[world]
generator = empty
[agents]
count = 2
layout = headon
radius = 8
[planner]
r_agent = 0.125
a_max = 20
j_max = 30
""",
    "loss_storm": """
[scenario]
mode = privileged
max_sim_time = 30
[world]
generator = empty
[agents]
count = 4
layout = headon
radius = 8
spacing = 0.4
[planner]
r_agent = 0.125
a_max = 20
j_max = 30
[comm]
latency = uniform 0.0 0.015
loss_prob = 0.3
schedule = bursty
burst_len = 4
""",
}
