"""Global path planning on the local voxel grid.

Pipeline: intermediate goal on the grid border, jump point search for a
shortest restricted-diagonal path, a search corridor around it, a
potential-weighted A* (the distance map planner) inside that corridor, and
line-of-sight shortening.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _search, _traversal
from . import voxel_map as vm
from .errors import ConfigurationError, NoPath

DEFAULT_W_POT = 1.0


@dataclass
class GlobalPath:
    waypoints: np.ndarray
    values: np.ndarray | None = None
    cost: float = float("nan")
    cum_dist: np.ndarray = field(init=False)

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 3)
        if self.values is None:
            self.values = np.zeros(len(self.waypoints))
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != len(self.waypoints):
            raise ConfigurationError("values and waypoints differ in length")
        seg = np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)
        self.cum_dist = np.concatenate([[0.0], np.cumsum(seg)])

    def __len__(self):
        return len(self.waypoints)

    @property
    def length(self) -> float:
        return float(self.cum_dist[-1]) if len(self.cum_dist) else 0.0

    def dedup(self, tol: float = 1e-9) -> "GlobalPath":
        """Drop consecutive duplicate waypoints so cum_dist is strictly increasing."""
        if len(self.waypoints) < 2:
            return self
        keep = [0]
        for i in range(1, len(self.waypoints)):
            if np.linalg.norm(self.waypoints[i] - self.waypoints[keep[-1]]) > tol:
                keep.append(i)
        return GlobalPath(self.waypoints[keep], self.values[keep], self.cost)


@dataclass
class SearchCorridor:
    mask: np.ndarray

    def __len__(self):
        return int(self.mask.sum())


def _voxel_coords(grid: vm.VoxelGrid, p) -> np.ndarray:
    return np.asarray(grid.to_voxel_coords(p), dtype=float)


def _potential_or_zero(grid: vm.VoxelGrid) -> np.ndarray:
    if grid.potential is None:
        return np.zeros(grid.dims)
    return grid.potential


def intermediate_goal(grid: vm.VoxelGrid, p_curr, p_goal) -> np.ndarray:
    """Goal itself when inside the grid, otherwise the border crossing toward it."""
    p_curr = np.asarray(p_curr, float)
    p_goal = np.asarray(p_goal, float)
    lo = grid.origin
    hi = lo + grid.extent
    if np.all(p_goal >= lo) and np.all(p_goal <= hi):
        return p_goal.copy()
    d = p_goal - p_curr
    t_exit = 1.0
    for a in range(3):
        if d[a] > 0:
            t_exit = min(t_exit, (hi[a] - p_curr[a]) / d[a])
        elif d[a] < 0:
            t_exit = min(t_exit, (lo[a] - p_curr[a]) / d[a])
    t_exit = max(t_exit, 0.0)
    p = p_curr + t_exit * d
    # keep the point inside the outermost voxel layer
    half = 0.5 * grid.voxel_size
    return np.clip(p, lo + half, hi - half)


def nearest_free_index(cells: np.ndarray, idx) -> np.ndarray:
    """Closest Free voxel to ``idx`` (itself when already Free)."""
    idx = np.clip(np.asarray(idx, np.int64), 0, np.array(cells.shape) - 1)
    if cells[tuple(idx)] == vm.FREE:
        return idx
    free = np.argwhere(cells == vm.FREE)
    if len(free) == 0:
        raise NoPath("grid has no free voxel")
    d2 = ((free - idx) ** 2).sum(axis=1)
    return free[int(np.argmin(d2))]


def _index_path_to_world(grid: vm.VoxelGrid, idx_path: np.ndarray) -> np.ndarray:
    return grid.index_to_center(idx_path)


def jps(grid: vm.VoxelGrid, start, goal) -> GlobalPath:
    """Shortest restricted-diagonal path between the voxels holding ``start`` and ``goal``."""
    s = grid.world_to_index(start)
    g = grid.world_to_index(goal)
    for name, v in (("start", s), ("goal", g)):
        if not grid.in_bounds(v) or grid.cells[tuple(v)] != vm.FREE:
            raise NoPath(f"{name} voxel {tuple(v)} is not free")
    cost, pts = _search.jps(grid.cells, s, g)
    if cost < 0:
        raise NoPath(f"no path from {tuple(s)} to {tuple(g)}")
    pot = _potential_or_zero(grid)
    vals = pot[pts[:, 0], pts[:, 1], pts[:, 2]]
    return GlobalPath(_index_path_to_world(grid, pts), vals, cost * grid.voxel_size)


def path_voxels(grid: vm.VoxelGrid, path: GlobalPath) -> np.ndarray:
    """Voxels crossed by the polyline (inside the grid), in order, without repeats."""
    out = []
    buf = np.empty((sum(grid.dims) * 2 + 8, 3), np.int64)
    dims = np.array(grid.dims, np.int64)
    wps = path.waypoints
    if len(wps) == 1:
        idx = grid.world_to_index(wps[0])
        return idx[None, :] if grid.in_bounds(idx) else np.empty((0, 3), np.int64)
    for a, b in zip(wps[:-1], wps[1:]):
        n = _traversal.traverse(_voxel_coords(grid, a), _voxel_coords(grid, b), dims, buf)
        for r in buf[:n]:
            t = tuple(int(v) for v in r)
            if not out or out[-1] != t:
                out.append(t)
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def build_corridor(path: GlobalPath, d_search: float, grid: vm.VoxelGrid) -> SearchCorridor:
    """Voxels whose centers lie within ``d_search`` of some path-voxel center."""
    if len(path) == 0:
        raise ConfigurationError("cannot build a corridor around an empty path")
    seeds = np.zeros(grid.dims, dtype=bool)
    vox = path_voxels(grid, path)
    if len(vox):
        seeds[vox[:, 0], vox[:, 1], vox[:, 2]] = True
    mask = np.isfinite(vm.dilate_distance(seeds, d_search / grid.voxel_size, inclusive=True))
    return SearchCorridor(mask)


def dmp(grid: vm.VoxelGrid, corridor: SearchCorridor, start, goal,
        w_pot: float = DEFAULT_W_POT) -> GlobalPath:
    """A* inside the corridor with per-edge cost ``|e| + w_pot * potential``."""
    s = grid.world_to_index(start)
    g = grid.world_to_index(goal)
    for name, v in (("start", s), ("goal", g)):
        if not grid.in_bounds(v) or grid.cells[tuple(v)] != vm.FREE:
            raise NoPath(f"{name} voxel {tuple(v)} is not free")
        if not corridor.mask[tuple(v)]:
            raise NoPath(f"{name} voxel {tuple(v)} is outside the search corridor")
    pot = _potential_or_zero(grid)
    cost, pts = _search.weighted_astar(grid.cells, corridor.mask, pot, w_pot, s, g)
    if cost < 0:
        raise NoPath("search corridor disconnects start from goal")
    vals = pot[pts[:, 0], pts[:, 1], pts[:, 2]]
    return GlobalPath(_index_path_to_world(grid, pts), vals, cost * grid.voxel_size)


def is_line_clear(grid: vm.VoxelGrid, a, b) -> bool:
    """No Occupied voxel and no positive potential along the exact traversal a -> b."""
    return bool(_traversal.line_clear_kernel(_voxel_coords(grid, a), _voxel_coords(grid, b),
                                             grid.cells, _potential_or_zero(grid)))


def is_point_free(grid: vm.VoxelGrid, p) -> bool:
    idx = grid.world_to_index(p)
    if not grid.in_bounds(idx):
        return False
    t = tuple(idx)
    return grid.cells[t] == vm.FREE and _potential_or_zero(grid)[t] <= 0.0


def shorten_path(path: GlobalPath, grid: vm.VoxelGrid) -> GlobalPath:
    """Remove waypoints skipped by clear lines between free, zero-potential points."""
    pts = [p for p in path.waypoints]
    vals = list(path.values)
    free = [is_point_free(grid, p) for p in pts]
    i = 0
    while i + 1 < len(pts):
        if free[i]:
            i_end = i
            j = i + 1
            while j < len(pts):
                if free[j] and is_line_clear(grid, pts[i], pts[j]):
                    i_end = j
                    j += 1
                else:
                    break
            if i_end > i + 1:
                del pts[i + 1:i_end]
                del vals[i + 1:i_end]
                del free[i + 1:i_end]
        i += 1
    return GlobalPath(np.array(pts), np.array(vals), path.cost)


def densify(path: GlobalPath, spacing: float) -> GlobalPath:
    """Insert points so consecutive waypoints are at most ``spacing`` apart."""
    if len(path) < 2:
        return GlobalPath(path.waypoints.copy(), path.values.copy(), path.cost)
    out = [path.waypoints[0]]
    for a, b in zip(path.waypoints[:-1], path.waypoints[1:]):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing - 1e-9)))
        for k in range(1, n + 1):
            out.append(a + (b - a) * (k / n))
    return GlobalPath(np.array(out), None, path.cost)


def annotate(path: GlobalPath, grid: vm.VoxelGrid) -> GlobalPath:
    """Attach the grid potential at each waypoint (100 outside the grid)."""
    pot = _potential_or_zero(grid)
    vals = np.empty(len(path))
    for i, p in enumerate(path.waypoints):
        idx = grid.world_to_index(p)
        vals[i] = pot[tuple(idx)] if grid.in_bounds(idx) else 100.0
    return GlobalPath(path.waypoints.copy(), vals, path.cost)


@dataclass
class PathPlanResult:
    path: GlobalPath | None
    status: str
    jps_path: GlobalPath | None = None
    corridor: SearchCorridor | None = None


def prepare_planning_grid(grid: vm.VoxelGrid, r_agent: float, d_pot_max: float) -> vm.VoxelGrid:
    """Free-unknown view, inflated by the agent clearance, with potentials and free border."""
    g = vm.view_free_unknown(grid)
    g = vm.inflate_obstacles(g, vm.clearance_inflation_radius(r_agent, g.voxel_size))
    g = vm.compute_potential(g, d_pot_max)
    return vm.force_border_free(g)


def plan_global_path(planning_grid: vm.VoxelGrid, p_start, p_goal, d_search: float,
                     w_pot: float = DEFAULT_W_POT) -> PathPlanResult:
    """Run intermediate goal, JPS, corridor, DMP and shortening on a prepared grid.

    The returned path starts at ``p_start`` exactly and ends at ``p_goal`` when the
    goal voxel lies in the grid and is free.
    """
    p_start = np.asarray(p_start, float)
    p_goal = np.asarray(p_goal, float)
    g = planning_grid
    goal_local = intermediate_goal(g, p_start, p_goal)
    try:
        s_idx = nearest_free_index(g.cells, g.world_to_index(p_start))
        g_idx = nearest_free_index(g.cells, g.world_to_index(goal_local))
    except NoPath:
        return PathPlanResult(None, "no_free_voxel")
    s_w = g.index_to_center(s_idx)
    g_w = g.index_to_center(g_idx)
    try:
        jp = jps(g, s_w, g_w)
    except NoPath:
        return PathPlanResult(None, "jps_failed")
    corridor = build_corridor(jp, d_search, g)
    status = "ok"
    try:
        path = dmp(g, corridor, s_w, g_w, w_pot)
    except NoPath:
        path, status = jp, "dmp_failed"
    pts = list(path.waypoints)
    if np.linalg.norm(pts[0] - p_start) > 1e-9:
        pts.insert(0, p_start)
    goal_exact = np.array_equal(g.world_to_index(goal_local), g_idx)
    if goal_exact and np.linalg.norm(pts[-1] - goal_local) > 1e-9:
        pts.append(goal_local)
    full = annotate(GlobalPath(np.array(pts), None, path.cost), g).dedup()
    return PathPlanResult(shorten_path(full, g), status, jp, corridor)


def dump_path_csv(path: GlobalPath, file) -> None:
    rows = ["x,y,z,potential,cum_dist"]
    for p, v, d in zip(path.waypoints, path.values, path.cum_dist):
        rows.append(f"{float(p[0])!r},{float(p[1])!r},{float(p[2])!r},{float(v)!r},{float(d)!r}")
    Path(file).write_text("\n".join(rows) + "\n")
