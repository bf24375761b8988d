"""Deterministic multi-agent simulation of the planning pipeline.

One loop iteration is one trajectory period.  Mapping and global path
planning fire on their own periods; every agent plans synchronously, then
broadcasts through a lossy, delayed channel, then executes one step of the
trajectory it planned in the previous iteration.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from . import corridor as cor
from . import global_path as gp
from . import mpc_miqp as mpc
from . import reference as rf
from . import voxel_map as vm
from .errors import ConfigurationError, DegenerateGeometry, InvalidSeed

ARRIVAL_TOL = 0.1
SUBSTEPS = 10
# exact contact is not a collision; absorbs rounding in the distance evaluation
CONTACT_TOL = 1e-9


# ----------------------------------------------------------------------------
# world

@dataclass
class Cylinder:
    center: np.ndarray
    radius: float
    z_lo: float
    z_hi: float

    def __post_init__(self):
        self.center = np.asarray(self.center, float).reshape(2)


@dataclass
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, float).reshape(3)
        self.hi = np.asarray(self.hi, float).reshape(3)


@dataclass
class World:
    cylinders: list = field(default_factory=list)
    boxes: list = field(default_factory=list)
    bounds_lo: np.ndarray = field(default_factory=lambda: np.array([-50.0, -50.0, -10.0]))
    bounds_hi: np.ndarray = field(default_factory=lambda: np.array([50.0, 50.0, 20.0]))

    def __post_init__(self):
        self.bounds_lo = np.asarray(self.bounds_lo, float)
        self.bounds_hi = np.asarray(self.bounds_hi, float)
        self.cyl = np.array([[c.center[0], c.center[1], c.radius, c.z_lo, c.z_hi]
                             for c in self.cylinders], float).reshape(-1, 5)
        self.box = np.array([np.concatenate([b.lo, b.hi]) for b in self.boxes],
                            float).reshape(-1, 6)
        for c in self.cylinders:
            if (c.center[0] - c.radius < self.bounds_lo[0] or c.center[0] + c.radius > self.bounds_hi[0]
                    or c.center[1] - c.radius < self.bounds_lo[1]
                    or c.center[1] + c.radius > self.bounds_hi[1]
                    or c.z_lo < self.bounds_lo[2] or c.z_hi > self.bounds_hi[2]):
                raise ConfigurationError("cylinder outside world bounds")
        for b in self.boxes:
            if np.any(b.lo < self.bounds_lo) or np.any(b.hi > self.bounds_hi):
                raise ConfigurationError("box outside world bounds")

    def distance(self, pts) -> np.ndarray:
        """Signed distance from each point to the nearest obstacle surface (inf if none)."""
        pts = np.atleast_2d(np.asarray(pts, float))
        return _distance_kernel(pts, self.cyl, self.box)

    def rasterize(self, origin_index, dims, voxel_size) -> np.ndarray:
        """Occupied where the closed voxel cube meets an obstacle, Free elsewhere."""
        return _rasterize_kernel(np.asarray(origin_index, np.int64),
                                 np.asarray(dims, np.int64), float(voxel_size),
                                 self.cyl, self.box)


@njit(cache=True)
def _cyl_distance(p, c):
    dx = p[0] - c[0]
    dy = p[1] - c[1]
    radial = math.sqrt(dx * dx + dy * dy) - c[2]
    dz = max(c[3] - p[2], p[2] - c[4])
    if radial <= 0.0 and dz <= 0.0:
        return max(radial, dz)
    return math.sqrt(max(radial, 0.0) ** 2 + max(dz, 0.0) ** 2)


@njit(cache=True)
def _box_distance(p, b):
    out = 0.0
    inside = -np.inf
    for a in range(3):
        d = max(b[a] - p[a], p[a] - b[3 + a])
        inside = max(inside, d)
        if d > 0:
            out += d * d
    if inside <= 0.0:
        return inside
    return math.sqrt(out)


@njit(cache=True)
def _distance_kernel(pts, cyl, box):
    out = np.full(pts.shape[0], np.inf)
    for i in range(pts.shape[0]):
        for j in range(cyl.shape[0]):
            out[i] = min(out[i], _cyl_distance(pts[i], cyl[j]))
        for j in range(box.shape[0]):
            out[i] = min(out[i], _box_distance(pts[i], box[j]))
    return out


@njit(cache=True)
def _rasterize_kernel(origin, dims, l, cyl, box):
    cells = np.zeros((dims[0], dims[1], dims[2]), np.int8)
    lo_w = origin * l
    hi_w = (origin + dims) * l
    for j in range(cyl.shape[0]):
        cx, cy, r, z0, z1 = cyl[j, 0], cyl[j, 1], cyl[j, 2], cyl[j, 3], cyl[j, 4]
        if cx + r < lo_w[0] or cx - r > hi_w[0] or cy + r < lo_w[1] or cy - r > hi_w[1]:
            continue
        if z1 < lo_w[2] or z0 > hi_w[2]:
            continue
        i0 = max(0, int(math.floor((cx - r) / l)) - origin[0] - 1)
        i1 = min(dims[0] - 1, int(math.floor((cx + r) / l)) - origin[0] + 1)
        j0 = max(0, int(math.floor((cy - r) / l)) - origin[1] - 1)
        j1 = min(dims[1] - 1, int(math.floor((cy + r) / l)) - origin[1] + 1)
        k0 = max(0, int(math.floor(z0 / l)) - origin[2] - 1)
        k1 = min(dims[2] - 1, int(math.floor(z1 / l)) - origin[2] + 1)
        for i in range(i0, i1 + 1):
            x0 = (i + origin[0]) * l
            qx = min(max(cx, x0), x0 + l)
            for jj in range(j0, j1 + 1):
                y0 = (jj + origin[1]) * l
                qy = min(max(cy, y0), y0 + l)
                if (qx - cx) ** 2 + (qy - cy) ** 2 > r * r:
                    continue
                for k in range(k0, k1 + 1):
                    zl = (k + origin[2]) * l
                    if zl <= z1 and zl + l >= z0:
                        cells[i, jj, k] = 1
    for j in range(box.shape[0]):
        lo_i = np.empty(3, np.int64)
        hi_i = np.empty(3, np.int64)
        for a in range(3):
            # closed cubes: a face exactly on a voxel boundary touches both sides
            lo_i[a] = max(0, int(math.ceil(box[j, a] / l)) - 1 - origin[a])
            hi_i[a] = min(dims[a] - 1, int(math.floor(box[j, 3 + a] / l)) - origin[a])
        for i in range(lo_i[0], hi_i[0] + 1):
            for jj in range(lo_i[1], hi_i[1] + 1):
                for k in range(lo_i[2], hi_i[2] + 1):
                    cells[i, jj, k] = 1
    return cells


# ----------------------------------------------------------------------------
# sensing

@dataclass
class SensorModel:
    max_range: float = 15.0
    angular_res: float = math.radians(0.5)

    def directions(self) -> np.ndarray:
        return _ray_directions(self.angular_res)


_DIR_CACHE: dict = {}


def _n_azimuth(res: float) -> int:
    return max(4, int(round(2 * math.pi / res)))


def _ray_directions(res: float) -> np.ndarray:
    """Unit ray directions, azimuth-major: row ``ia * (n_el + 1) + ie``."""
    key = round(res, 12)
    if key not in _DIR_CACHE:
        n_az = _n_azimuth(res)
        n_el = max(2, int(round(math.pi / res)))
        az = np.arange(n_az) * (2 * math.pi / n_az)
        el = -math.pi / 2 + np.arange(n_el + 1) * (math.pi / n_el)
        A, E = np.meshgrid(az, el, indexing="ij")
        d = np.stack([np.cos(E) * np.cos(A), np.cos(E) * np.sin(A), np.sin(E)], axis=-1)
        _DIR_CACHE[key] = np.ascontiguousarray(d.reshape(-1, 3))
    return _DIR_CACHE[key]


@njit(cache=True)
def _ray_cylinder(o, d, c):
    best = np.inf
    ox = o[0] - c[0]
    oy = o[1] - c[1]
    r = c[2]
    a = d[0] * d[0] + d[1] * d[1]
    if a > 1e-18:
        b = 2.0 * (ox * d[0] + oy * d[1])
        cc = ox * ox + oy * oy - r * r
        disc = b * b - 4.0 * a * cc
        if disc >= 0.0:
            t = (-b - math.sqrt(disc)) / (2.0 * a)
            if t >= 0.0:
                z = o[2] + t * d[2]
                if c[3] <= z <= c[4]:
                    best = t
    if abs(d[2]) > 1e-18:
        for zc in (c[3], c[4]):
            t = (zc - o[2]) / d[2]
            if 0.0 <= t < best:
                x = ox + t * d[0]
                y = oy + t * d[1]
                if x * x + y * y <= r * r:
                    best = t
    return best


@njit(cache=True)
def _ray_box(o, d, b):
    t0 = 0.0
    t1 = np.inf
    for a in range(3):
        if abs(d[a]) < 1e-18:
            if o[a] < b[a] or o[a] > b[3 + a]:
                return np.inf
        else:
            ta = (b[a] - o[a]) / d[a]
            tb = (b[3 + a] - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return np.inf
    return t0


@njit(cache=True)
def _az_span(o, cx, cy, half):
    """Azimuth interval (center, half width) subtended by a disc, or half < 0 for all."""
    dx = cx - o[0]
    dy = cy - o[1]
    rho = math.sqrt(dx * dx + dy * dy)
    if rho <= half:
        return 0.0, -1.0
    return math.atan2(dy, dx), math.asin(half / rho)


@njit(cache=True)
def _scan_kernel(o, dirs, n_az, cyl, box, max_range):
    """Nearest hit per ray; obstacles only visit the azimuth columns they can occlude."""
    n_el = dirs.shape[0] // n_az
    best = np.full(dirs.shape[0], np.inf)
    step = 2.0 * math.pi / n_az
    for j in range(cyl.shape[0] + box.shape[0]):
        if j < cyl.shape[0]:
            center, half = _az_span(o, cyl[j, 0], cyl[j, 1], cyl[j, 2])
        else:
            b = box[j - cyl.shape[0]]
            hx = 0.5 * (b[3] - b[0])
            hy = 0.5 * (b[4] - b[1])
            center, half = _az_span(o, b[0] + hx, b[1] + hy, math.sqrt(hx * hx + hy * hy))
        if half < 0.0:
            a0 = 0
            a1 = n_az - 1
        else:
            a0 = int(math.floor((center - half) / step)) - 1
            a1 = int(math.ceil((center + half) / step)) + 1
            if a1 - a0 >= n_az:
                a0 = 0
                a1 = n_az - 1
        for ia in range(a0, a1 + 1):
            col = ia % n_az
            for ie in range(n_el):
                r = col * n_el + ie
                if j < cyl.shape[0]:
                    t = _ray_cylinder(o, dirs[r], cyl[j])
                else:
                    t = _ray_box(o, dirs[r], box[j - cyl.shape[0]])
                if t < best[r]:
                    best[r] = t
    hits = np.empty((dirs.shape[0], 3))
    n = 0
    for r in range(dirs.shape[0]):
        if best[r] <= max_range:
            hits[n] = o + best[r] * dirs[r]
            n += 1
    return hits[:n]


def simulate_depth_scan(world: World, pose, max_range: float = 15.0,
                        angular_res: float = math.radians(0.5)) -> vm.PointCloud:
    """Nearest obstacle hit per ray of a full spherical fan."""
    o = np.asarray(pose, float).reshape(3)
    cyl = world.cyl
    if len(cyl):
        near = np.hypot(cyl[:, 0] - o[0], cyl[:, 1] - o[1]) - cyl[:, 2] <= max_range
        cyl = np.ascontiguousarray(cyl[near])
    box = world.box
    if len(box):
        near = np.array([_box_distance(o, b) <= max_range for b in box])
        box = np.ascontiguousarray(box[near])
    dirs = _ray_directions(angular_res)
    pts = _scan_kernel(o, dirs, _n_azimuth(angular_res), cyl, box, float(max_range))
    return vm.PointCloud(pts, o)


# ----------------------------------------------------------------------------
# communication

@dataclass
class CommModel:
    latency: tuple = ("fixed", 0.0)
    loss_prob: float = 0.0
    seed: int = 0
    schedule: str = "bernoulli"
    burst_len: int = 5

    def __post_init__(self):
        kind = self.latency[0]
        if kind == "fixed":
            if self.latency[1] < 0:
                raise ConfigurationError("latency must be non-negative")
        elif kind == "uniform":
            lo, hi = self.latency[1], self.latency[2]
            if lo < 0 or hi < lo:
                raise ConfigurationError("uniform latency needs 0 <= lo <= hi")
        else:
            raise ConfigurationError(f"unknown latency model {kind!r}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigurationError("loss_prob must lie in [0, 1]")
        if self.schedule not in ("bernoulli", "alternating", "bursty"):
            raise ConfigurationError(f"unknown loss schedule {self.schedule!r}")
        self.rng = np.random.default_rng(self.seed)
        self._burst_left: dict = {}

    def sample_latency(self) -> float:
        if self.latency[0] == "fixed":
            return float(self.latency[1])
        return float(self.rng.uniform(self.latency[1], self.latency[2]))

    def lost(self, sender: int, receiver: int, iteration: int) -> bool:
        """Loss decision; the RNG is consumed in a fixed order for determinism."""
        u = float(self.rng.random())
        if self.schedule == "bernoulli":
            return u < self.loss_prob
        if self.schedule == "alternating":
            return iteration % 2 == 1 and u < self.loss_prob
        key = (sender, receiver)
        left = self._burst_left.get(key, 0)
        if left > 0:
            self._burst_left[key] = left - 1
            return True
        if u < self.loss_prob:
            self._burst_left[key] = self.burst_len - 1
            return True
        return False


@dataclass
class Message:
    sender: int
    stamp: int
    traj: mpc.Trajectory
    arrival: float


# ----------------------------------------------------------------------------
# agents and parameters

@dataclass
class PlannerParams:
    N: int = 9
    h: float = 0.1
    P_hor: int = 3
    v_samp_min: float = 4.5
    v_samp_max: float = 6.0
    s_d: float = 0.001
    s_o: float = 0.01
    d_pot_max: float = 0.6
    d_search: float = 1.5
    i_path_start: int = 9
    r_agent: float = 0.125
    z_offset: float = 0.125
    a_max: float = 20.0
    j_max: float = 30.0
    T_map: float = 0.2
    T_path: float = 0.2
    T_traj: float = 0.1
    dims: tuple = vm.DEFAULT_DIMS
    voxel_size: float = vm.DEFAULT_VOXEL_SIZE
    w_pot: float = gp.DEFAULT_W_POT
    comm_range: float | None = None
    max_nodes: int = 2000
    solver_budget: float | None = None
    weights: mpc.CostWeights = field(default_factory=mpc.CostWeights)
    sensor: SensorModel = field(default_factory=SensorModel)

    def __post_init__(self):
        pos = dict(N=self.N, h=self.h, P_hor=self.P_hor, v_samp_max=self.v_samp_max,
                   d_pot_max=self.d_pot_max, d_search=self.d_search, r_agent=self.r_agent,
                   a_max=self.a_max, j_max=self.j_max, T_map=self.T_map,
                   T_path=self.T_path, T_traj=self.T_traj, voxel_size=self.voxel_size)
        for k, v in pos.items():
            if not v > 0:
                raise ConfigurationError(f"{k} must be positive, got {v}")
        if self.z_offset < 0 or self.v_samp_min < 0:
            raise ConfigurationError("z_offset and v_samp_min must be non-negative")
        if self.v_samp_min > self.v_samp_max:
            raise ConfigurationError("v_samp_min exceeds v_samp_max")
        if not 0 <= self.i_path_start <= self.N:
            raise ConfigurationError(f"i_path_start must lie in 0..{self.N}")
        if abs(self.T_traj - self.h) > 1e-12:
            raise ConfigurationError("T_traj must equal the discretization step h")
        for name in ("T_map", "T_path"):
            ratio = getattr(self, name) / self.T_traj
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ConfigurationError(f"{name} must be a multiple of T_traj")
        if self.r_agent > self.voxel_size:
            raise ConfigurationError("r_agent larger than the voxel size is not supported")
        self.dims = tuple(int(d) for d in self.dims)
        if self.comm_range is None:
            self.comm_range = (self.dims[0] - 1) * self.voxel_size
        self.limits = mpc.DynamicLimits.symmetric(self.a_max, self.j_max, 1.5 * self.v_samp_max)

    @property
    def map_every(self) -> int:
        return int(round(self.T_map / self.T_traj))

    @property
    def path_every(self) -> int:
        return int(round(self.T_path / self.T_traj))

    @property
    def m_big(self) -> float:
        return 4.0 * float(np.linalg.norm(np.array(self.dims) * self.voxel_size))


@dataclass
class AgentRuntime:
    id: int
    goal: np.ndarray
    state: mpc.AgentState
    exec_traj: mpc.Trajectory
    ref: rf.ReferenceTrajectory
    r_agent: float
    z_offset: float
    grid: vm.VoxelGrid | None = None
    occ_grid: vm.VoxelGrid | None = None
    plan_grid: vm.VoxelGrid | None = None
    path: gp.GlobalPath | None = None
    pending_path: tuple | None = None
    v_samp: float = 0.0
    inbox: dict = field(default_factory=dict)
    arrival_time: float | None = None
    first_motion: float | None = None
    last_plan_iter: int = 0
    fast_progress: int = 0


@dataclass
class Event:
    t: float
    agent: int
    kind: str
    payload: str = ""

    def line(self) -> str:
        return f"{self.t:.3f},{self.agent},{self.kind},{self.payload}"


@dataclass
class AgentMetrics:
    agent: int
    arrived: bool
    flight_time: float
    flight_distance: float
    mean_velocity: float
    acc_cost: float
    jerk_cost: float


@dataclass
class Metrics:
    agents: list
    collision_flag: bool
    deadlock_flag: bool
    success_count: int
    success: bool
    sim_time: float


@dataclass
class SimResult:
    metrics: Metrics
    events: list
    traj_rows: list
    compute_times: list
    unknown_violations: int
    min_separation: float
    rest_checks: list
    invariant_violations: list = field(default_factory=list)
    corridors: list = field(default_factory=list)

    def event_lines(self) -> list:
        return [e.line() for e in self.events]


TRAJ_HEADER = "t,agent,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz"


def write_event_log(events, file) -> None:
    Path(file).write_text("t,agent,event,payload\n"
                          + "".join(e.line() + "\n" for e in events))


def write_traj_csv(rows, file) -> None:
    lines = [TRAJ_HEADER]
    for r in rows:
        lines.append(f"{r[0]:.3f},{int(r[1])}," + ",".join(f"{v:.6f}" for v in r[2:]))
    Path(file).write_text("\n".join(lines) + "\n")


# ----------------------------------------------------------------------------
# checks and metrics

def check_collisions(p_from: np.ndarray, p_to: np.ndarray, world: World, r_agent: float,
                     z_offset: float, t: float = 0.0, substeps: int = SUBSTEPS) -> list:
    """Collision events along linearly interpolated motion of all agents over one step."""
    events = []
    seen = set()
    scale = np.array([1.0, 1.0, r_agent / (r_agent + z_offset)])
    n = len(p_from)
    for s in range(substeps + 1):
        f = s / substeps
        pts = (1 - f) * p_from + f * p_to
        if len(world.cyl) or len(world.box):
            d = world.distance(pts)
            for i in np.nonzero(d < r_agent - CONTACT_TOL)[0]:
                if ("o", int(i)) not in seen:
                    seen.add(("o", int(i)))
                    events.append(Event(t, int(i), "collision_obstacle",
                                        f"clearance={d[i]:.4f}"))
        for i in range(n):
            dd = np.linalg.norm((pts[i + 1:] - pts[i]) * scale, axis=1)
            for j in np.nonzero(dd < 2 * r_agent - CONTACT_TOL)[0]:
                key = ("a", i, i + 1 + int(j))
                if key not in seen:
                    seen.add(key)
                    events.append(Event(t, i, "collision_agent",
                                        f"peer={i + 1 + int(j)} scaled={dd[j]:.4f}"))
    return events


def detect_deadlock(history: list, arrived: list, window_steps: int, eps: float = 0.05) -> list:
    """Agents not at goal whose displacement over the trailing window is below ``eps``."""
    if len(history) <= window_steps:
        return []
    now = history[-1]
    then = history[-1 - window_steps]
    out = []
    for i in range(len(now)):
        if not arrived[i] and np.linalg.norm(now[i] - then[i]) < eps:
            out.append(i)
    return out


def accumulate_metrics(traj_rows: list, n_agents: int, h: float, arrival: list,
                       first_motion: list) -> list:
    """Per-agent distance, time, and squared acceleration/jerk integrals."""
    out = []
    rows = np.array(traj_rows, float).reshape(-1, 14)
    for i in range(n_agents):
        r = rows[rows[:, 1] == i]
        if len(r) > 1:
            dist = float(np.sum(np.linalg.norm(np.diff(r[:, 2:5], axis=0), axis=1)))
        else:
            dist = 0.0
        acc = float(np.sum(np.einsum("ij,ij->i", r[1:, 8:11], r[1:, 8:11])) * h) if len(r) else 0.0
        jerk = float(np.sum(np.einsum("ij,ij->i", r[1:, 11:14], r[1:, 11:14])) * h) if len(r) else 0.0
        arrived = arrival[i] is not None
        if arrived and first_motion[i] is not None:
            ft = arrival[i] - first_motion[i]
        elif arrived:
            ft = 0.0
        else:
            ft = float("nan")
        mv = dist / ft if arrived and ft > 0 else 0.0
        out.append(AgentMetrics(i, arrived, ft, dist, mv, acc, jerk))
    return out


# ----------------------------------------------------------------------------
# simulation

class Simulation:
    """Synchronous swarm simulation; ``mode`` is ``privileged`` or ``fov``."""

    def __init__(self, world: World, spawns, goals, params: PlannerParams, comm: CommModel,
                 mode: str = "privileged", max_time: float = 60.0, budgeted: bool = False,
                 deadlock_window: float = 10.0, deadlock_eps: float = 0.05,
                 check_unknown: bool = True, record_corridors: bool = False):
        if mode not in ("privileged", "fov"):
            raise ConfigurationError(f"unknown mode {mode!r}")
        spawns = np.asarray(spawns, float).reshape(-1, 3)
        goals = np.asarray(goals, float).reshape(-1, 3)
        if len(spawns) != len(goals):
            raise ConfigurationError("spawn and goal counts differ")
        self.world = world
        self.params = params
        self.comm = comm
        self.mode = mode
        self.max_time = max_time
        self.budgeted = budgeted
        self.deadlock_window = deadlock_window
        self.deadlock_eps = deadlock_eps
        self.check_unknown = check_unknown
        self.record_corridors = record_corridors
        self.corridors: list = []
        self.invariant_violations: list = []
        P = params
        self.agents = []
        for i, (s, g) in enumerate(zip(spawns, goals)):
            traj = mpc.rest_trajectory(s, P.N, P.h, stamp=-1)
            self.agents.append(AgentRuntime(
                i, g.copy(), traj.state(0), traj, rf.stationary_reference(s, P.N, P.h),
                P.r_agent, P.z_offset))
        for a in self.agents:
            for b in self.agents:
                if a.id != b.id:
                    a.inbox[b.id] = (b.exec_traj.stamp, b.exec_traj)
        self.pending: list = []
        self.events: list = []
        self.traj_rows: list = []
        self.compute_times: list = []
        self.history: list = []
        self.iteration = 0
        self.unknown_violations = 0
        self.min_separation = np.inf
        self.rest_checks: list = []
        self.deadlocked = False
        self.collided = False
        for a in self.agents:
            self._log_row(0.0, a, np.zeros(3))
        self.history.append(np.array([a.state.p for a in self.agents]))

    # -- helpers -------------------------------------------------------------
    def _event(self, t, agent, kind, payload=""):
        self.events.append(Event(t, agent, kind, payload))

    def _log_row(self, t, a: AgentRuntime, jerk):
        s = a.state
        self.traj_rows.append([t, a.id, *s.p, *s.v, *s.a, *jerk])

    # -- mapping -------------------------------------------------------------
    def update_map(self, a: AgentRuntime):
        P = self.params
        pos = a.state.p
        if self.mode == "privileged":
            origin = vm.grid_origin_for(pos, P.dims, P.voxel_size)
            cells = self.world.rasterize(origin, P.dims, P.voxel_size)
            grid = vm.VoxelGrid(origin, P.voxel_size, cells)
        else:
            cloud = simulate_depth_scan(self.world, pos, P.sensor.max_range, P.sensor.angular_res)
            meas = vm.raycast_free(vm.build_measurement_grid(cloud, pos, P.dims, P.voxel_size))
            grid = vm.merge(meas, a.grid)
        a.grid = grid
        radius = vm.clearance_inflation_radius(P.r_agent, P.voxel_size)
        occ = vm.inflate_obstacles(vm.view_occupy_unknown(grid), radius)
        a.occ_grid = vm.compute_potential(occ, P.d_pot_max)
        a.plan_grid = gp.prepare_planning_grid(grid, P.r_agent, P.d_pot_max)

    # -- global path ---------------------------------------------------------
    def plan_path(self, a: AgentRuntime, t: float):
        P = self.params
        if a.path is None:
            start = a.state.p.copy()
            head = np.zeros((0, 3))
        else:
            start = rf.path_plan_start(a.ref, min(P.i_path_start, a.ref.N))
            head = a.ref.positions[:min(P.i_path_start, a.ref.N) + 1]
        res = gp.plan_global_path(a.plan_grid, start, a.goal, P.d_search, P.w_pot)
        if res.path is None:
            self._event(t, a.id, "path_fail", res.status)
            return
        pts = np.vstack([head, res.path.waypoints]) if len(head) else res.path.waypoints
        path = gp.GlobalPath(pts).dedup()
        dense = gp.annotate(gp.densify(path, P.voxel_size), a.occ_grid)
        v = rf.adapt_speed(dense, P.s_d, P.s_o, P.v_samp_min, P.v_samp_max)
        a.pending_path = (path, v)

    # -- trajectory ----------------------------------------------------------
    def _peers_in_range(self, a: AgentRuntime):
        P = self.params
        out = []
        for b in self.agents:
            if b.id != a.id and np.linalg.norm(b.state.p - a.state.p) <= P.comm_range:
                out.append(b.id)
        return out

    def _reference(self, a: AgentRuntime, x0p):
        P = self.params
        if a.path is None:
            return rf.stationary_reference(a.state.p, P.N, P.h)
        prog = rf.path_progress(a.ref, x0p)
        if prog > float(np.linalg.norm(a.ref.positions[1] - a.ref.positions[0])) + 1e-9:
            a.fast_progress += 1
        start = rf.advance_start(a.ref, prog)
        return rf.sample_reference(a.path, start, a.v_samp, P.N, P.h)

    def _corridor_waypoints(self, a: AgentRuntime, ref: rf.ReferenceTrajectory):
        if a.path is None:
            return ref.positions
        s_end, _, _ = rf.project_onto_path(a.path, ref.positions[-1])
        tail = a.path.waypoints[a.path.cum_dist > s_end + 1e-9]
        return np.vstack([ref.positions, tail])

    def plan_agent(self, a: AgentRuntime, peers: list, t: float):
        """TASC, reference and MIQP for one agent; returns (trajectory, ok, info)."""
        P = self.params
        prev = a.exec_traj
        x0p = prev.states[1, 0:3]
        ref = self._reference(a, x0p)
        try:
            sc = cor.build_safe_corridor(a.occ_grid, self._corridor_waypoints(a, ref), x0p,
                                         P.P_hor)
            tasc = cor.build_tasc(sc, prev, [a.inbox[j][1] for j in peers],
                                  P.r_agent, P.z_offset)
        except (InvalidSeed, DegenerateGeometry) as exc:
            return None, ref, f"{type(exc).__name__}"
        if self.record_corridors:
            self.corridors.append((t, a.id, [(p.A.copy(), p.c.copy()) for p in sc]))
        traj, res = mpc.plan_iteration(prev, ref, tasc, P.limits, P.weights,
                                       budget=P.solver_budget, max_nodes=P.max_nodes,
                                       M_big=P.m_big)
        if not res.ok:
            return None, ref, res.status
        return traj, ref, res.status

    def step(self):
        P = self.params
        l = self.iteration
        t = l * P.T_traj
        # channel delivery for this iteration
        still = []
        for rcv, msg in self.pending:
            if msg.arrival <= t + 1e-12:
                cur = self.agents[rcv].inbox.get(msg.sender)
                if cur is None or msg.stamp > cur[0]:
                    self.agents[rcv].inbox[msg.sender] = (msg.stamp, msg.traj)
            else:
                still.append((rcv, msg))
        self.pending = still
        for a in self.agents:
            if a.pending_path is not None:
                a.path, a.v_samp = a.pending_path
                a.pending_path = None
        if l % P.map_every == 0:
            for a in self.agents:
                self.update_map(a)
        if l % P.path_every == 0:
            for a in self.agents:
                self.plan_path(a, t)
        # synchronous planning
        new_trajs = []
        t_comp = []
        for a in self.agents:
            peers = self._peers_in_range(a)
            missing = [j for j in peers if a.inbox.get(j, (-99,))[0] != l - 1]
            tic = time.perf_counter()
            if missing:
                traj, ok = a.exec_traj.shifted(l), False
                self._event(t, a.id, "skip_plan", "missing=" + "|".join(map(str, missing)))
                new_ref = None
            else:
                traj, new_ref, status = self.plan_agent(a, peers, t)
                ok = traj is not None
                if not ok:
                    self._event(t, a.id, "plan_fail", status)
                    traj = a.exec_traj.shifted(l)
            dt = time.perf_counter() - tic
            if self.budgeted:
                self.compute_times.append(dt)
                if ok and dt > P.T_traj:
                    self._event(t, a.id, "plan_overrun", f"{dt * 1e3:.1f}ms")
                    traj, ok = a.exec_traj.shifted(l), False
            traj.stamp = l
            if ok:
                self._check_invariants(a, traj, t)
                a.last_plan_iter = l
                if new_ref is not None:
                    a.ref = new_ref
                if self.mode == "fov" and self.check_unknown:
                    self._check_unknown(a, traj, t)
            new_trajs.append(traj)
            t_comp.append(dt if self.budgeted else 0.0)
        # broadcast
        for a, traj, tc in zip(self.agents, new_trajs, t_comp):
            for b in self.agents:
                if b.id == a.id:
                    continue
                lat = self.comm.sample_latency()
                if self.comm.lost(a.id, b.id, l):
                    continue
                self.pending.append((b.id, Message(a.id, l, traj, t + tc + lat)))
        # execute one step of the previous plan
        p_from = np.array([a.exec_traj.states[0, 0:3] for a in self.agents])
        p_to = np.array([a.exec_traj.states[1, 0:3] for a in self.agents])
        evs = check_collisions(p_from, p_to, self.world, P.r_agent, P.z_offset, t)
        if evs:
            self.collided = True
            self.events.extend(evs)
        scale = np.array([1.0, 1.0, P.r_agent / (P.r_agent + P.z_offset)])
        for i in range(len(p_to)):
            for j in range(i + 1, len(p_to)):
                self.min_separation = min(self.min_separation,
                                          float(np.linalg.norm((p_to[i] - p_to[j]) * scale)))
        t_next = t + P.T_traj
        for a, traj in zip(self.agents, new_trajs):
            jerk = a.exec_traj.inputs[0].copy()
            a.state = a.exec_traj.state(1)
            a.exec_traj = traj
            self._log_row(t_next, a, jerk)
            if a.first_motion is None and np.linalg.norm(a.state.v) > 1e-6:
                a.first_motion = t
            if a.arrival_time is None and np.linalg.norm(a.state.p - a.goal) < ARRIVAL_TOL:
                a.arrival_time = t_next
                self._event(t_next, a.id, "arrived", f"t={t_next:.3f}")
        self.history.append(p_to.copy())
        self.iteration += 1

    def _check_invariants(self, a: AgentRuntime, traj: mpc.Trajectory, t: float):
        P = self.params
        resid = traj.dynamics_residual(P.limits.drag)
        rest = float(max(np.abs(traj.states[-1, 3:9])))
        self.rest_checks.append(rest)
        jerk = float(np.max(np.abs(traj.inputs))) if traj.inputs.size else 0.0
        acc = traj.accelerations
        msgs = []
        if resid > 1e-6:
            msgs.append(f"dynamics_residual={resid:.3e}")
        if rest > 1e-9:
            msgs.append(f"terminal_motion={rest:.3e}")
        if jerk > float(np.max(P.limits.j_max)) * (1 + 1e-6) + 1e-9:
            msgs.append(f"jerk={jerk:.4f}")
        if np.any(acc < P.limits.a_lo - 1e-6) or np.any(acc > P.limits.a_hi + 1e-6):
            msgs.append("acceleration_bound")
        if np.linalg.norm(traj.states[0, 0:3] - a.exec_traj.states[1, 0:3]) > 1e-6:
            msgs.append("discontinuous_start")
        if msgs:
            ev = Event(t, a.id, "invariant", " ".join(msgs))
            self.events.append(ev)
            self.invariant_violations.append(ev)

    def _check_unknown(self, a: AgentRuntime, traj: mpc.Trajectory, t: float):
        g = a.grid
        bad = 0
        for p in traj.positions:
            st = g.state_at(p)
            if st is None or st == vm.VoxelState.UNKNOWN:
                bad += 1
        if bad:
            self.unknown_violations += bad
            self._event(t, a.id, "unknown_violation", f"samples={bad}")

    def warmup(self):
        """Compile and exercise every kernel once without touching the run state."""
        a = self.agents[0]
        clone = AgentRuntime(a.id, a.goal.copy(), a.state, a.exec_traj, a.ref, a.r_agent,
                             a.z_offset, inbox=dict(a.inbox))
        saved = list(self.events)
        self.update_map(clone)
        self.plan_path(clone, 0.0)
        if clone.pending_path is not None:
            clone.path, clone.v_samp = clone.pending_path
        self.plan_agent(clone, [], 0.0)
        self.events = saved

    def run(self) -> SimResult:
        P = self.params
        if self.budgeted:
            self.warmup()
        n_steps = int(round(self.max_time / P.T_traj))
        window = int(round(self.deadlock_window / P.T_traj))
        for _ in range(n_steps):
            self.step()
            t = self.iteration * P.T_traj
            if self.collided:
                break
            arrived = [a.arrival_time is not None for a in self.agents]
            if all(arrived):
                break
            stuck = detect_deadlock(self.history, arrived, window, self.deadlock_eps)
            if stuck:
                self.deadlocked = True
                self._event(t, stuck[0], "deadlock", "agents=" + "|".join(map(str, stuck)))
                break
        t_end = self.iteration * P.T_traj
        arrived = [a.arrival_time is not None for a in self.agents]
        if not all(arrived) and not self.collided and not self.deadlocked:
            self._event(t_end, -1, "timeout", f"arrived={sum(arrived)}")
        per_agent = accumulate_metrics(self.traj_rows, len(self.agents), P.h,
                                       [a.arrival_time for a in self.agents],
                                       [a.first_motion for a in self.agents])
        succ = sum(arrived)
        success = all(arrived) and not self.collided
        metrics = Metrics(per_agent, self.collided, self.deadlocked, succ, success, t_end)
        self._event(t_end, -1, "end", f"success={int(success)}")
        return SimResult(metrics, self.events, self.traj_rows, self.compute_times,
                         self.unknown_violations, self.min_separation, self.rest_checks,
                         self.invariant_violations, self.corridors)
