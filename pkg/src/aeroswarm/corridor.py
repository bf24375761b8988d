"""Safe corridors along the global path and their time-aware extension.

Polyhedra are kept in halfspace form ``A p <= c`` with unit row normals.  The
static part is a chain of axis-aligned free cuboids grown greedily on the
occupy-unknown grid; inter-agent separation adds one row per neighbour and
per future step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from . import voxel_map as vm
from .errors import DegenerateGeometry, InvalidSeed

# inward shrink of cuboid faces so boundary points are strictly inside voxels
FACE_MARGIN = 1e-4


@dataclass
class Polyhedron:
    A: np.ndarray
    c: np.ndarray
    box_lo: np.ndarray | None = None
    box_hi: np.ndarray | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(-1, 3)
        self.c = np.asarray(self.c, dtype=float).reshape(-1)

    @property
    def halfspaces(self):
        return [(self.A[i].copy(), float(self.c[i])) for i in range(len(self.c))]

    def contains(self, p, tol: float = 0.0) -> bool:
        return bool(np.all(self.A @ np.asarray(p, float) <= self.c + tol))

    def violation(self, p) -> float:
        return float(np.max(self.A @ np.asarray(p, float) - self.c, initial=-np.inf))

    def with_rows(self, A_extra, c_extra) -> "Polyhedron":
        if len(c_extra) == 0:
            return Polyhedron(self.A.copy(), self.c.copy(), self.box_lo, self.box_hi)
        return Polyhedron(np.vstack([self.A, A_extra]), np.concatenate([self.c, c_extra]),
                          self.box_lo, self.box_hi)


@dataclass
class Hyperplane:
    point: np.ndarray
    normal: np.ndarray
    d_offset: float = 0.0

    def row(self):
        """Halfspace row keeping the planning agent on the normal side."""
        return -self.normal, -float(self.normal @ self.point)


@dataclass
class Tasc:
    corridors: list = field(default_factory=list)

    def __len__(self):
        return len(self.corridors)


_FACES = np.array([[0, 1], [0, -1], [1, 1], [1, -1], [2, 1], [2, -1]], np.int64)


@njit(cache=True)
def _layer_free(cells, lo, hi, axis, side):
    pos = hi[axis] + 1 if side > 0 else lo[axis] - 1
    if pos < 0 or pos >= cells.shape[axis]:
        return False
    a0 = lo.copy()
    a1 = hi.copy()
    a0[axis] = pos
    a1[axis] = pos
    for i in range(a0[0], a1[0] + 1):
        for j in range(a0[1], a1[1] + 1):
            for k in range(a0[2], a1[2] + 1):
                if cells[i, j, k] != 0:
                    return False
    return True


@njit(cache=True)
def _grow_box(cells, lo, hi, face_order, n_first):
    """Round-robin face growth; the first ``n_first`` faces grow alone first."""
    active = np.ones(6, np.bool_)
    for phase in range(2):
        n_faces = n_first if phase == 0 else 6
        while True:
            grew = False
            for fi in range(n_faces):
                f = face_order[fi]
                if not active[f]:
                    continue
                axis = _FACES[f, 0]
                side = _FACES[f, 1]
                if _layer_free(cells, lo, hi, axis, side):
                    if side > 0:
                        hi[axis] += 1
                    else:
                        lo[axis] -= 1
                    grew = True
                else:
                    active[f] = False
            if not grew:
                break
    return lo, hi


def _restricted_axes(cells, idx):
    out = []
    for a in range(3):
        blocked = 0
        for s in (-1, 1):
            n = idx.copy()
            n[a] += s
            if not (0 <= n[a] < cells.shape[a]) or cells[tuple(n)] != vm.FREE:
                blocked += 1
        out.append(blocked == 2)
    return out


def box_polyhedron(grid: vm.VoxelGrid, lo, hi, margin: float = FACE_MARGIN) -> Polyhedron:
    """Halfspaces of the closed world box covering voxel index ranges ``lo..hi``."""
    lo = np.asarray(lo, np.int64)
    hi = np.asarray(hi, np.int64)
    wlo = (lo + grid.origin_index) * grid.voxel_size + margin
    whi = (hi + 1 + grid.origin_index) * grid.voxel_size - margin
    A = np.vstack([np.eye(3), -np.eye(3)])
    c = np.concatenate([whi, -wlo])
    return Polyhedron(A, c, lo.copy(), hi.copy())


def grow_cuboid(grid_occ: vm.VoxelGrid, seed_lo, seed_hi=None):
    """Index bounds of the greedy free cuboid grown from the seed box."""
    lo = np.array(seed_lo, np.int64)
    hi = np.array(seed_lo if seed_hi is None else seed_hi, np.int64)
    cells = grid_occ.cells
    if not grid_occ.in_bounds(lo) or not grid_occ.in_bounds(hi):
        raise InvalidSeed(f"seed box {tuple(lo)}..{tuple(hi)} is outside the grid")
    if np.any(cells[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1] != vm.FREE):
        raise InvalidSeed(f"seed box {tuple(lo)}..{tuple(hi)} is not free")
    restricted = _restricted_axes(cells, lo) if seed_hi is None else [False] * 3
    free_axes = [a for a in range(3) if not restricted[a]]
    tight_axes = [a for a in range(3) if restricted[a]]
    order = [2 * a + s for a in free_axes for s in (0, 1)]
    n_first = len(order) if tight_axes else 6
    order += [2 * a + s for a in tight_axes for s in (0, 1)]
    lo, hi = _grow_box(cells, lo, hi, np.array(order, np.int64), n_first)
    return lo, hi


def inflate_polyhedron(grid_occ: vm.VoxelGrid, seed) -> Polyhedron:
    """Greedy axis-aligned free cuboid around the voxel holding ``seed``."""
    idx = grid_occ.world_to_index(seed)
    if not grid_occ.in_bounds(idx) or grid_occ.cells[tuple(idx)] != vm.FREE:
        raise InvalidSeed(f"seed voxel {tuple(idx)} is not free")
    lo, hi = grow_cuboid(grid_occ, idx)
    return box_polyhedron(grid_occ, lo, hi)


def _walk_points(waypoints: np.ndarray, step: float) -> np.ndarray:
    out = []
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        seg = np.linalg.norm(b - a)
        n = max(1, int(np.ceil(seg / step)))
        f = np.arange(1, n + 1)[:, None] / n
        out.append(a + (b - a) * f)
    return np.vstack(out) if out else np.zeros((0, 3))


def _walk_voxels(grid_occ: vm.VoxelGrid, pts: np.ndarray) -> list:
    """Distinct consecutive voxels of the walk, cut at the first non-free or outside one."""
    if len(pts) == 0:
        return []
    idx = np.floor(pts / grid_occ.voxel_size).astype(np.int64) - grid_occ.origin_index
    inside = np.all((idx >= 0) & (idx < np.array(grid_occ.dims)), axis=1)
    ok = inside.copy()
    ok[inside] = grid_occ.cells[idx[inside, 0], idx[inside, 1], idx[inside, 2]] == vm.FREE
    bad = np.nonzero(~ok)[0]
    if len(bad):
        idx = idx[:bad[0]]
    if len(idx) == 0:
        return []
    keep = np.ones(len(idx), bool)
    keep[1:] = np.any(idx[1:] != idx[:-1], axis=1)
    return [tuple(int(v) for v in r) for r in idx[keep]]


def build_safe_corridor(grid_occ: vm.VoxelGrid, path, p_curr, P_hor: int) -> list:
    """Chain of overlapping free cuboids seeded at ``p_curr`` and along ``path``.

    The walk stops at the first sample outside the grid or in a non-free voxel,
    so the corridor never reaches past the explored free space.
    """
    if P_hor < 1:
        raise ValueError("P_hor must be at least 1")
    polys = [inflate_polyhedron(grid_occ, p_curr)]
    waypoints = path.waypoints if hasattr(path, "waypoints") else np.asarray(path, float)
    if len(waypoints) < 1 or P_hor == 1:
        return polys
    pts = _walk_points(np.vstack([np.asarray(p_curr, float), waypoints]),
                       grid_occ.voxel_size / 10.0)
    cells = grid_occ.cells
    boxes = [(tuple(polys[0].box_lo), tuple(polys[0].box_hi))]
    prev_inside = tuple(int(v) for v in grid_occ.world_to_index(p_curr))
    for idx in _walk_voxels(grid_occ, pts):
        if any(_in_box(idx, lo, hi) for lo, hi in boxes):
            if _in_box(idx, *boxes[-1]):
                prev_inside = idx
            continue
        if len(polys) >= P_hor:
            break
        lo = np.minimum(prev_inside, idx)
        hi = np.maximum(prev_inside, idx)
        if np.all(cells[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1] == vm.FREE):
            blo, bhi = grow_cuboid(grid_occ, lo, hi)
        else:
            blo, bhi = grow_cuboid(grid_occ, np.array(idx))
        polys.append(box_polyhedron(grid_occ, blo, bhi))
        boxes.append((tuple(int(v) for v in blo), tuple(int(v) for v in bhi)))
        prev_inside = idx
    return polys


def _in_box(idx, lo, hi) -> bool:
    return (lo[0] <= idx[0] <= hi[0] and lo[1] <= idx[1] <= hi[1]
            and lo[2] <= idx[2] <= hi[2])


def _box_has(P: Polyhedron, idx) -> bool:
    return bool(np.all(idx >= P.box_lo) and np.all(idx <= P.box_hi))


def _metric(r_agent: float, z_offset: float) -> np.ndarray:
    return np.array([1.0, 1.0, r_agent / (r_agent + z_offset)])


def scaled_distance(p, q, r_agent: float, z_offset: float) -> float:
    """Distance in the metric where the agent ellipsoid becomes a ball of radius ``r_agent``."""
    return float(np.linalg.norm(_metric(r_agent, z_offset) * (np.asarray(p) - np.asarray(q))))


def separating_hyperplane(p_plan, p_other, r_agent: float, z_offset: float) -> Hyperplane:
    """Plane between two agents, shifted toward ``p_plan`` by the ellipsoid support.

    The normal is the ellipsoid-metric gradient direction ``S^2 (p_plan - p_other)``
    and the offset equals ``r_agent * |S^-1 n|``, so two agents kept on opposite
    sides of the pair of planes never overlap as ellipsoids.
    """
    p_plan = np.asarray(p_plan, float)
    p_other = np.asarray(p_other, float)
    delta = p_plan - p_other
    if not np.all(np.isfinite(delta)) or np.linalg.norm(delta) < 1e-12:
        raise DegenerateGeometry(f"coincident positions {p_plan} and {p_other}")
    s = _metric(r_agent, z_offset)
    g = s * s * delta
    n = g / np.linalg.norm(g)
    d_offset = r_agent * float(np.linalg.norm(n / s))
    mid = 0.5 * (p_plan + p_other)
    return Hyperplane(mid + d_offset * n, n, d_offset)


def build_tasc(sc_raw: list, traj_self, trajs_others: list, r_agent: float,
               z_offset: float, n_corridors: int | None = None) -> Tasc:
    """Per-step corridors: ``SC_k`` holds planes built from step ``k + 1`` positions.

    ``traj_self`` and ``trajs_others`` are position arrays (N+1 x 3) or objects
    with a ``positions`` attribute.  By default one corridor per step 1..N is
    built, so every predicted position is covered.
    """
    ps = _positions(traj_self)
    others = [_positions(t) for t in trajs_others]
    n_steps = len(ps) - 1
    if n_corridors is None:
        n_corridors = n_steps
    corridors = []
    for k in range(n_corridors):
        rows_A, rows_c = [], []
        for po in others:
            hp = separating_hyperplane(ps[k + 1], po[k + 1], r_agent, z_offset)
            a, c = hp.row()
            rows_A.append(a)
            rows_c.append(c)
        A_extra = np.array(rows_A).reshape(-1, 3)
        c_extra = np.array(rows_c)
        corridors.append([P.with_rows(A_extra, c_extra) for P in sc_raw])
    return Tasc(corridors)


def _positions(t):
    if hasattr(t, "positions"):
        return np.asarray(t.positions, float)
    return np.asarray(t, float)


def dump_polyhedra_csv(polys: list, file) -> None:
    rows = ["poly,nx,ny,nz,c"]
    for i, P in enumerate(polys):
        for a, c in zip(P.A, P.c):
            rows.append(f"{i},{float(a[0])!r},{float(a[1])!r},{float(a[2])!r},{float(c)!r}")
    Path(file).write_text("\n".join(rows) + "\n")
