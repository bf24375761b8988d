"""Exact voxel traversal kernels (Amanatides-Woo stepping with tie handling).

Coordinates passed to these kernels are in voxel units relative to the grid
origin, so voxel ``i`` spans ``[i, i + 1)`` along each axis.  A voxel is
reported only when the segment crosses it with positive length; exact edge
and corner crossings step every tied axis at once.
"""

import numpy as np
from numba import njit

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

_TIE = 1e-9


@njit(cache=True)
def traverse(start, end, dims, out):
    """Write the voxels crossed by ``start -> end`` into ``out`` (n x 3).

    Returns the number of voxels written.  Voxels outside ``dims`` end the walk.
    """
    cur = np.empty(3, np.int64)
    step = np.zeros(3, np.int64)
    t_max = np.empty(3)
    t_delta = np.empty(3)
    for a in range(3):
        d = end[a] - start[a]
        c = np.floor(start[a])
        if d < 0.0 and c == start[a]:
            c -= 1.0
        cur[a] = np.int64(c)
        if d > 0.0:
            step[a] = 1
            t_max[a] = (c + 1.0 - start[a]) / d
            t_delta[a] = 1.0 / d
        elif d < 0.0:
            step[a] = -1
            t_max[a] = (start[a] - c) / (-d)
            t_delta[a] = -1.0 / d
        else:
            t_max[a] = np.inf
            t_delta[a] = np.inf
    n = 0
    for a in range(3):
        if cur[a] < 0 or cur[a] >= dims[a]:
            return 0
    out[n, 0] = cur[0]
    out[n, 1] = cur[1]
    out[n, 2] = cur[2]
    n += 1
    while True:
        t = min(t_max[0], min(t_max[1], t_max[2]))
        if t >= 1.0 - _TIE:
            break
        for a in range(3):
            if t_max[a] <= t + _TIE:
                cur[a] += step[a]
                t_max[a] += t_delta[a]
        inside = True
        for a in range(3):
            if cur[a] < 0 or cur[a] >= dims[a]:
                inside = False
        if not inside or n >= out.shape[0]:
            break
        out[n, 0] = cur[0]
        out[n, 1] = cur[1]
        out[n, 2] = cur[2]
        n += 1
    return n


@njit(cache=True)
def raycast_free_kernel(cells):
    """Free unknown voxels on every center-to-border ray up to the first hit."""
    nx, ny, nz = cells.shape
    dims = np.array([nx, ny, nz], np.int64)
    cx, cy, cz = nx // 2, ny // 2, nz // 2
    start = np.array([cx + 0.5, cy + 0.5, cz + 0.5])
    end = np.empty(3)
    buf = np.empty((nx + ny + nz + 3, 3), np.int64)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if not (i == 0 or j == 0 or k == 0 or i == nx - 1
                        or j == ny - 1 or k == nz - 1):
                    continue
                end[0] = i + 0.5
                end[1] = j + 0.5
                end[2] = k + 0.5
                n = traverse(start, end, dims, buf)
                for s in range(n):
                    v = cells[buf[s, 0], buf[s, 1], buf[s, 2]]
                    if v == OCCUPIED:
                        break
                    if v == UNKNOWN:
                        cells[buf[s, 0], buf[s, 1], buf[s, 2]] = FREE
    return cells


@njit(cache=True)
def line_clear_kernel(start, end, cells, potential):
    nx, ny, nz = cells.shape
    dims = np.array([nx, ny, nz], np.int64)
    buf = np.empty((nx + ny + nz + 3, 3), np.int64)
    n = traverse(start, end, dims, buf)
    if n == 0:
        return False
    for s in range(n):
        i, j, k = buf[s, 0], buf[s, 1], buf[s, 2]
        if cells[i, j, k] == OCCUPIED or potential[i, j, k] > 0.0:
            return False
    # the walk stops early when it leaves the grid
    for a in range(3):
        e = end[a]
        if e < 0.0 or e > dims[a]:
            return False
    return True
