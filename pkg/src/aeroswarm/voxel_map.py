"""Local tri-state voxel grids: measurement, raycasting, merging and potentials.

Cells are stored as ``int8`` with the values of :class:`VoxelState`.  Grid
origins are kept as integer voxel indices so that grids built around
different agent positions line up exactly when merged.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from . import _traversal
from .errors import ConfigurationError

DEFAULT_DIMS = (67, 67, 21)
DEFAULT_VOXEL_SIZE = 0.3


class VoxelState(enum.IntEnum):
    FREE = _traversal.FREE
    OCCUPIED = _traversal.OCCUPIED
    UNKNOWN = _traversal.UNKNOWN


FREE = np.int8(VoxelState.FREE)
OCCUPIED = np.int8(VoxelState.OCCUPIED)
UNKNOWN = np.int8(VoxelState.UNKNOWN)


@dataclass
class PointCloud:
    points: np.ndarray
    sensor_origin: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.sensor_origin = np.asarray(self.sensor_origin, dtype=float)


@dataclass
class VoxelGrid:
    origin_index: np.ndarray
    voxel_size: float
    cells: np.ndarray
    potential: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.origin_index = np.asarray(self.origin_index, dtype=np.int64)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.cells.shape)

    @property
    def origin(self) -> np.ndarray:
        return self.origin_index * self.voxel_size

    @property
    def center_index(self) -> np.ndarray:
        return np.array(self.cells.shape, dtype=np.int64) // 2

    @property
    def extent(self) -> np.ndarray:
        return np.array(self.cells.shape) * self.voxel_size

    def world_to_index(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.floor(p / self.voxel_size).astype(np.int64) - self.origin_index

    def index_to_center(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=float)
        return (idx + self.origin_index + 0.5) * self.voxel_size

    def to_voxel_coords(self, p) -> np.ndarray:
        """Continuous coordinates in voxel units relative to the origin."""
        return np.asarray(p, dtype=float) / self.voxel_size - self.origin_index

    def in_bounds(self, idx) -> bool:
        idx = np.asarray(idx)
        return bool(np.all(idx >= 0) and np.all(idx < np.array(self.cells.shape)))

    def contains(self, p) -> bool:
        return self.in_bounds(self.world_to_index(p))

    def state_at(self, p) -> VoxelState | None:
        idx = self.world_to_index(p)
        if not self.in_bounds(idx):
            return None
        return VoxelState(int(self.cells[tuple(idx)]))

    def with_cells(self, cells: np.ndarray, potential=None) -> "VoxelGrid":
        return VoxelGrid(self.origin_index.copy(), self.voxel_size, cells, potential)

    def copy(self) -> "VoxelGrid":
        pot = None if self.potential is None else self.potential.copy()
        return VoxelGrid(self.origin_index.copy(), self.voxel_size, self.cells.copy(), pot)


def grid_origin_for(agent_pos, dims, voxel_size) -> np.ndarray:
    """Origin index placing ``agent_pos`` in the center voxel of a ``dims`` grid."""
    dims = np.asarray(dims, dtype=np.int64)
    if np.any(dims % 2 == 0) or np.any(dims <= 0):
        raise ConfigurationError(f"grid dims must be positive and odd, got {tuple(dims)}")
    return np.floor(np.asarray(agent_pos, float) / voxel_size).astype(np.int64) - dims // 2


def empty_grid(agent_pos, dims=DEFAULT_DIMS, voxel_size=DEFAULT_VOXEL_SIZE,
               fill=VoxelState.UNKNOWN) -> VoxelGrid:
    origin = grid_origin_for(agent_pos, dims, voxel_size)
    cells = np.full(tuple(int(d) for d in dims), np.int8(fill), dtype=np.int8)
    return VoxelGrid(origin, float(voxel_size), cells)


def build_measurement_grid(cloud: PointCloud, agent_pos, dims=DEFAULT_DIMS,
                           voxel_size=DEFAULT_VOXEL_SIZE) -> VoxelGrid:
    grid = empty_grid(agent_pos, dims, voxel_size)
    if len(cloud.points):
        idx = np.floor(cloud.points / voxel_size).astype(np.int64) - grid.origin_index
        keep = np.all((idx >= 0) & (idx < np.array(grid.dims)), axis=1)
        idx = idx[keep]
        grid.cells[idx[:, 0], idx[:, 1], idx[:, 2]] = OCCUPIED
    return grid


def raycast_free(grid: VoxelGrid) -> VoxelGrid:
    cells = _traversal.raycast_free_kernel(grid.cells.copy())
    return grid.with_cells(cells)


def merge(meas: VoxelGrid, last: VoxelGrid | None) -> VoxelGrid:
    """Fill the unknown cells of ``meas`` from the world-aligned cells of ``last``."""
    out = meas.cells.copy()
    if last is None:
        return meas.with_cells(out)
    if not math.isclose(meas.voxel_size, last.voxel_size, rel_tol=0, abs_tol=1e-12):
        raise ConfigurationError(
            f"cannot merge grids with voxel sizes {meas.voxel_size} and {last.voxel_size}")
    shift = meas.origin_index - last.origin_index
    m_lo, l_lo, size = [], [], []
    for a in range(3):
        lo = max(0, -shift[a])
        hi = min(meas.dims[a], last.dims[a] - shift[a])
        if hi <= lo:
            return meas.with_cells(out)
        m_lo.append(lo)
        l_lo.append(lo + shift[a])
        size.append(hi - lo)
    ms = tuple(slice(m_lo[a], m_lo[a] + size[a]) for a in range(3))
    ls = tuple(slice(l_lo[a], l_lo[a] + size[a]) for a in range(3))
    region = out[ms]
    unknown = region == UNKNOWN
    region[unknown] = last.cells[ls][unknown]
    return meas.with_cells(out)


def view_free_unknown(grid: VoxelGrid) -> VoxelGrid:
    cells = grid.cells.copy()
    cells[cells == UNKNOWN] = FREE
    return grid.with_cells(cells)


def view_occupy_unknown(grid: VoxelGrid) -> VoxelGrid:
    cells = grid.cells.copy()
    cells[cells == UNKNOWN] = OCCUPIED
    return grid.with_cells(cells)


def _ball_offsets(radius_vox: float, inclusive: bool):
    """Integer offsets within ``radius_vox`` and their lengths, as (n, 3) and (n,)."""
    r = int(math.floor(radius_vox + 1e-9))
    ax = np.arange(-r, r + 1)
    offs = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    d = np.sqrt((offs * offs).sum(axis=1))
    keep = d <= radius_vox + 1e-9 if inclusive else d < radius_vox - 1e-9
    return offs[keep].astype(np.int64), d[keep]


@njit(cache=True)
def _scatter_min(mask, offs, dists, out):
    nx, ny, nz = mask.shape
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if not mask[x, y, z]:
                    continue
                for m in range(offs.shape[0]):
                    i = x + offs[m, 0]
                    j = y + offs[m, 1]
                    k = z + offs[m, 2]
                    if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz and dists[m] < out[i, j, k]:
                        out[i, j, k] = dists[m]
    return out


def dilate_distance(mask: np.ndarray, radius_vox: float, inclusive: bool) -> np.ndarray:
    """Center distance (voxel units) to the nearest ``mask`` cell within the radius, else inf."""
    # no offset longer than the grid diagonal can land inside the grid
    radius_vox = min(radius_vox, float(np.linalg.norm(mask.shape)) + 1.0)
    offs, dists = _ball_offsets(radius_vox, inclusive)
    out = np.full(mask.shape, np.inf)
    if len(offs) == 0:
        return out
    return _scatter_min(np.ascontiguousarray(mask, dtype=np.bool_), offs, dists, out)


def obstacle_distance(occupied: np.ndarray, voxel_size: float, d_max: float) -> np.ndarray:
    """Center-to-center distance to the nearest occupied voxel, truncated at ``d_max``.

    Cells with no occupied voxel closer than ``d_max`` hold ``inf``.
    """
    return dilate_distance(occupied, d_max / voxel_size, inclusive=False) * voxel_size


def potential_from_distance(dist: np.ndarray, d_pot_max: float) -> np.ndarray:
    if d_pot_max <= 0:
        raise ConfigurationError("d_pot_max must be positive")
    ratio = np.clip(1.0 - dist / d_pot_max, 0.0, 1.0)
    return 100.0 * ratio ** 4


def compute_potential(grid: VoxelGrid, d_pot_max: float,
                      unknown_as_occupied: bool = False) -> VoxelGrid:
    """Attach the obstacle potential ``100 (1 - d/d_pot_max)^4`` to the grid."""
    if d_pot_max <= 0:
        raise ConfigurationError("d_pot_max must be positive")
    occ = grid.cells == OCCUPIED
    if unknown_as_occupied:
        occ |= grid.cells == UNKNOWN
    dist = obstacle_distance(occ, grid.voxel_size, d_pot_max)
    pot = potential_from_distance(dist, d_pot_max)
    pot[occ] = 100.0
    return grid.with_cells(grid.cells.copy(), pot)


def inflate_obstacles(grid: VoxelGrid, radius: float) -> VoxelGrid:
    """Mark Free cells whose center lies within ``radius`` of an Occupied center."""
    occ = grid.cells == OCCUPIED
    hit = np.isfinite(dilate_distance(occ, radius / grid.voxel_size, inclusive=True))
    cells = grid.cells.copy()
    cells[hit & (cells == FREE)] = OCCUPIED
    return grid.with_cells(cells)


def clearance_inflation_radius(r_agent: float, voxel_size: float) -> float:
    """Smallest center-distance radius guaranteeing clearance ``r_agent``.

    Every voxel left outside the radius is separated from the occupied voxel
    by a gap of at least ``r_agent`` (box-to-box distance), so an agent
    center anywhere inside it cannot touch an obstacle lying inside an
    occupied voxel.
    """
    need = r_agent / voxel_size
    reach = int(math.ceil(need)) + 2
    radius = 0.0
    for i in range(reach + 1):
        for j in range(reach + 1):
            for k in range(reach + 1):
                gap = math.sqrt(sum(max(v - 1, 0) ** 2 for v in (i, j, k)))
                if gap < need - 1e-12:
                    radius = max(radius, math.sqrt(i * i + j * j + k * k))
    return radius * voxel_size


def force_border_free(grid: VoxelGrid) -> VoxelGrid:
    cells = grid.cells.copy()
    cells[0, :, :] = FREE
    cells[-1, :, :] = FREE
    cells[:, 0, :] = FREE
    cells[:, -1, :] = FREE
    cells[:, :, 0] = FREE
    cells[:, :, -1] = FREE
    pot = None
    if grid.potential is not None:
        pot = grid.potential.copy()
        for sl in ((0,), (-1,)):
            pot[sl[0], :, :] = 0.0
            pot[:, sl[0], :] = 0.0
            pot[:, :, sl[0]] = 0.0
    return grid.with_cells(cells, pot)


_STATE_CHARS = {int(FREE): ".", int(OCCUPIED): "#", int(UNKNOWN): "?"}


def dump_grid(grid: VoxelGrid, path) -> None:
    """Write the text dump: header ``dims origin voxel_size`` then x-fastest states."""
    nx, ny, nz = grid.dims
    ox, oy, oz = grid.origin
    lut = np.array([_STATE_CHARS[i] for i in range(3)])
    body = "".join(lut[grid.cells.transpose(2, 1, 0).ravel()])
    head = " ".join(repr(float(v)) for v in (ox, oy, oz, grid.voxel_size))
    Path(path).write_text(f"{nx} {ny} {nz} {head}\n{body}\n")


def load_grid(path) -> VoxelGrid:
    header, body = Path(path).read_text().split("\n", 1)
    parts = header.split()
    dims = tuple(int(v) for v in parts[:3])
    origin = np.array([float(v) for v in parts[3:6]])
    size = float(parts[6])
    rev = {c: s for s, c in _STATE_CHARS.items()}
    flat = np.array([rev[c] for c in body.strip()], dtype=np.int8)
    cells = flat.reshape(dims[2], dims[1], dims[0]).transpose(2, 1, 0).copy()
    return VoxelGrid(np.rint(origin / size).astype(np.int64), size, cells)


def dump_potential_csv(grid: VoxelGrid, path) -> None:
    if grid.potential is None:
        raise ConfigurationError("grid has no potential to dump")
    idx = np.argwhere(np.ones(grid.dims, bool))
    centers = grid.index_to_center(idx)
    vals = grid.potential[idx[:, 0], idx[:, 1], idx[:, 2]]
    with open(path, "w") as fh:
        fh.write("x,y,z,potential\n")
        for c, v in zip(centers, vals):
            fh.write(f"{float(c[0])!r},{float(c[1])!r},{float(c[2])!r},{float(v)!r}\n")
