"""Numba kernels for grid searches on the 26-connected voxel lattice.

A diagonal move is admissible only when a monotone staircase of face moves
through free voxels connects its endpoints (corner cutting is forbidden).
Jump point search uses generic local pruning: a neighbour ``m`` of ``n``
reached from parent ``p`` is pruned when some path from ``p`` to ``m`` inside
the 3x3x3 cube around ``n`` that avoids ``n`` is shorter, or equally short
and starts with a move of a more diagonal class.
"""

import heapq
import itertools

import numpy as np
from numba import njit

from ._traversal import FREE

_EPS = 1e-9


def _make_dirs():
    dirs = [d for d in itertools.product((-1, 0, 1), repeat=3) if any(d)]
    # more diagonal classes first: 3D diagonals, planar diagonals, straights
    dirs.sort(key=lambda d: (3 - sum(map(abs, d)), d))
    return np.array(dirs, dtype=np.int64)


DIRS = _make_dirs()
NDIR = DIRS.shape[0]
# memo sentinel for jumps not yet evaluated
UNSEEN = -2
DIR_CLASS = (3 - np.abs(DIRS).sum(axis=1)).astype(np.int64)
DIR_LEN = np.sqrt(np.abs(DIRS).sum(axis=1).astype(np.float64))
DIR_LUT = np.full(27, -1, np.int64)
for _i, _d in enumerate(DIRS):
    DIR_LUT[(_d[0] + 1) * 9 + (_d[1] + 1) * 3 + (_d[2] + 1)] = _i
START_BIT = np.int64(1) << np.int64(NDIR)


@njit(cache=True)
def is_free(cells, x, y, z):
    if x < 0 or y < 0 or z < 0:
        return False
    if x >= cells.shape[0] or y >= cells.shape[1] or z >= cells.shape[2]:
        return False
    return cells[x, y, z] == FREE


@njit(cache=True)
def admissible(cells, x, y, z, dx, dy, dz):
    """Move admissibility from free voxel (x,y,z) along (dx,dy,dz)."""
    if not is_free(cells, x + dx, y + dy, z + dz):
        return False
    k = abs(dx) + abs(dy) + abs(dz)
    if k == 1:
        return True
    if k == 2:
        if dx == 0:
            return is_free(cells, x, y + dy, z) or is_free(cells, x, y, z + dz)
        if dy == 0:
            return is_free(cells, x + dx, y, z) or is_free(cells, x, y, z + dz)
        return is_free(cells, x + dx, y, z) or is_free(cells, x, y + dy, z)
    fx = is_free(cells, x + dx, y, z)
    fy = is_free(cells, x, y + dy, z)
    fz = is_free(cells, x, y, z + dz)
    fxy = is_free(cells, x + dx, y + dy, z)
    fxz = is_free(cells, x + dx, y, z + dz)
    fyz = is_free(cells, x, y + dy, z + dz)
    return ((fx and (fxy or fxz)) or (fy and (fxy or fyz))
            or (fz and (fxz or fyz)))


@njit(cache=True)
def _cube_free(cells, x, y, z):
    if x < 1 or y < 1 or z < 1:
        return False
    if x + 1 >= cells.shape[0] or y + 1 >= cells.shape[1] or z + 1 >= cells.shape[2]:
        return False
    for i in range(x - 1, x + 2):
        for j in range(y - 1, y + 2):
            for k in range(z - 1, z + 2):
                if cells[i, j, k] != FREE:
                    return False
    return True


@njit(cache=True)
def _all_admissible(cells, x, y, z, dirs):
    mask = np.int64(0)
    for e in range(dirs.shape[0]):
        if admissible(cells, x, y, z, dirs[e, 0], dirs[e, 1], dirs[e, 2]):
            mask |= np.int64(1) << np.int64(e)
    return mask


@njit(cache=True)
def pruned_successors(cells, x, y, z, pd, dirs, dir_class, dir_len, dir_lut):
    """Bitmask of successor directions of (x,y,z) reached along direction ``pd``."""
    if pd < 0:
        return _all_admissible(cells, x, y, z, dirs)
    px = x - dirs[pd, 0]
    py = y - dirs[pd, 1]
    pz = z - dirs[pd, 2]
    # local Dijkstra on the cube around n, coordinates relative to n
    dist = np.full(27, np.inf)
    rank = np.full(27, 99, np.int64)
    done = np.zeros(27, np.bool_)
    blocked = np.zeros(27, np.bool_)
    for a in range(3):
        for b in range(3):
            for c in range(3):
                li = a * 9 + b * 3 + c
                if li == 13 or not is_free(cells, x + a - 1, y + b - 1, z + c - 1):
                    blocked[li] = True
    src = (px - x + 1) * 9 + (py - y + 1) * 3 + (pz - z + 1)
    dist[src] = 0.0
    rank[src] = -1
    for _ in range(27):
        u = -1
        for li in range(27):
            if done[li] or blocked[li] or dist[li] == np.inf:
                continue
            if u < 0 or dist[li] < dist[u] - 1e-9 or (
                    abs(dist[li] - dist[u]) <= 1e-9 and rank[li] < rank[u]):
                u = li
        if u < 0:
            break
        done[u] = True
        ua, ub, uc = u // 9, (u // 3) % 3, u % 3
        for e in range(dirs.shape[0]):
            wa = ua + dirs[e, 0]
            wb = ub + dirs[e, 1]
            wc = uc + dirs[e, 2]
            if wa < 0 or wb < 0 or wc < 0 or wa > 2 or wb > 2 or wc > 2:
                continue
            w = wa * 9 + wb * 3 + wc
            if blocked[w] or done[w]:
                continue
            if not admissible(cells, x + ua - 1, y + ub - 1, z + uc - 1,
                              dirs[e, 0], dirs[e, 1], dirs[e, 2]):
                continue
            nd = dist[u] + dir_len[e]
            nr = dir_class[e] if u == src else rank[u]
            if nd < dist[w] - 1e-9 or (abs(nd - dist[w]) <= 1e-9 and nr < rank[w]):
                dist[w] = nd
                rank[w] = nr
    mask = np.int64(0)
    for e in range(dirs.shape[0]):
        if not admissible(cells, x, y, z, dirs[e, 0], dirs[e, 1], dirs[e, 2]):
            continue
        m = (dirs[e, 0] + 1) * 9 + (dirs[e, 1] + 1) * 3 + (dirs[e, 2] + 1)
        via = dir_len[pd] + dir_len[e]
        alt = dist[m]
        if alt < via - 1e-9 or (abs(alt - via) <= 1e-9 and rank[m] < dir_class[pd]):
            continue
        mask |= np.int64(1) << np.int64(e)
    return mask


def _natural_masks():
    cells = np.zeros((5, 5, 5), np.int8)
    out = np.zeros(NDIR, np.int64)
    for d in range(NDIR):
        out[d] = pruned_successors(cells, 2, 2, 2, d, DIRS, DIR_CLASS, DIR_LEN, DIR_LUT)
    return out


NATURAL = _natural_masks()


@njit(cache=True)
def successors(cells, x, y, z, pd, natural, dirs, dir_class, dir_len, dir_lut):
    if pd >= 0 and _cube_free(cells, x, y, z):
        return natural[pd]
    return pruned_successors(cells, x, y, z, pd, dirs, dir_class, dir_len, dir_lut)


@njit(cache=True)
def _cube_table(cells):
    """True where every in-grid cell of the 3x3x3 neighbourhood is free.

    Cells outside the grid cannot shorten a local detour between in-grid
    cells, so they never create forced neighbours.
    """
    nx, ny, nz = cells.shape
    out = np.zeros((nx, ny, nz), np.bool_)
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                ok = True
                for i in range(max(0, x - 1), min(nx, x + 2)):
                    for j in range(max(0, y - 1), min(ny, y + 2)):
                        for k in range(max(0, z - 1), min(nz, z + 2)):
                            if cells[i, j, k] != FREE:
                                ok = False
                out[x, y, z] = ok
    return out


@njit(cache=True)
def _has_forced(cells, cube, fc, x, y, z, d, natural, dirs, dir_class, dir_len, dir_lut):
    if cube[x, y, z]:
        return False
    nid = (x * cells.shape[1] + y) * cells.shape[2] + z
    v = fc[nid, d]
    if v < 0:
        s = pruned_successors(cells, x, y, z, d, dirs, dir_class, dir_len, dir_lut)
        v = 1 if (s & ~natural[d]) != 0 else 0
        fc[nid, d] = v
    return v == 1


@njit(cache=True)
def _fill(jm, x, y, z, dx, dy, dz, d, count, result, ny, nz):
    for i in range(count):
        cx = x + i * dx
        cy = y + i * dy
        cz = z + i * dz
        jm[(cx * ny + cy) * nz + cz, d] = -1 if result < 0 else result - i


@njit(cache=True)
def _jump_straight(cells, cube, fc, jm, x, y, z, d, goal, natural, dirs, dir_class,
                   dir_len, dir_lut):
    """Steps to the next jump point along straight ``d`` (-1 if blocked), memoized."""
    ny, nz = cells.shape[1], cells.shape[2]
    v = jm[(x * ny + y) * nz + z, d]
    if v != UNSEEN:
        return v
    dx, dy, dz = dirs[d, 0], dirs[d, 1], dirs[d, 2]
    cx, cy, cz = x, y, z
    steps = 0
    result = -1
    while True:
        if not admissible(cells, cx, cy, cz, dx, dy, dz):
            break
        cx += dx
        cy += dy
        cz += dz
        steps += 1
        if cx == goal[0] and cy == goal[1] and cz == goal[2]:
            result = steps
            break
        if _has_forced(cells, cube, fc, cx, cy, cz, d, natural, dirs, dir_class, dir_len,
                       dir_lut):
            result = steps
            break
    _fill(jm, x, y, z, dx, dy, dz, d, steps if result < 0 else result, result, ny, nz)
    if result < 0:
        jm[(cx * ny + cy) * nz + cz, d] = -1
    return result


@njit(cache=True)
def _jump_planar(cells, cube, fc, jm, x, y, z, d, goal, natural, dirs, dir_class,
                 dir_len, dir_lut):
    ny, nz = cells.shape[1], cells.shape[2]
    v = jm[(x * ny + y) * nz + z, d]
    if v != UNSEEN:
        return v
    dx, dy, dz = dirs[d, 0], dirs[d, 1], dirs[d, 2]
    cx, cy, cz = x, y, z
    steps = 0
    result = -1
    while result < 0:
        if not admissible(cells, cx, cy, cz, dx, dy, dz):
            break
        cx += dx
        cy += dy
        cz += dz
        steps += 1
        if cx == goal[0] and cy == goal[1] and cz == goal[2]:
            result = steps
            break
        if _has_forced(cells, cube, fc, cx, cy, cz, d, natural, dirs, dir_class, dir_len,
                       dir_lut):
            result = steps
            break
        for e in range(dirs.shape[0]):
            if e == d or (natural[d] >> e) & 1 == 0:
                continue
            s = _jump_straight(cells, cube, fc, jm, cx, cy, cz, e, goal, natural, dirs,
                               dir_class, dir_len, dir_lut)
            if s > 0:
                result = steps
                break
    _fill(jm, x, y, z, dx, dy, dz, d, steps if result < 0 else result, result, ny, nz)
    if result < 0:
        jm[(cx * ny + cy) * nz + cz, d] = -1
    return result


@njit(cache=True)
def _jump_3d(cells, cube, fc, jm, x, y, z, d, goal, natural, dirs, dir_class, dir_len,
             dir_lut):
    ny, nz = cells.shape[1], cells.shape[2]
    v = jm[(x * ny + y) * nz + z, d]
    if v != UNSEEN:
        return v
    dx, dy, dz = dirs[d, 0], dirs[d, 1], dirs[d, 2]
    cx, cy, cz = x, y, z
    steps = 0
    result = -1
    while result < 0:
        if not admissible(cells, cx, cy, cz, dx, dy, dz):
            break
        cx += dx
        cy += dy
        cz += dz
        steps += 1
        if cx == goal[0] and cy == goal[1] and cz == goal[2]:
            result = steps
            break
        if _has_forced(cells, cube, fc, cx, cy, cz, d, natural, dirs, dir_class, dir_len,
                       dir_lut):
            result = steps
            break
        for e in range(dirs.shape[0]):
            if e == d or (natural[d] >> e) & 1 == 0:
                continue
            if dir_class[e] == 1:
                s = _jump_planar(cells, cube, fc, jm, cx, cy, cz, e, goal, natural, dirs,
                                 dir_class, dir_len, dir_lut)
            else:
                s = _jump_straight(cells, cube, fc, jm, cx, cy, cz, e, goal, natural, dirs,
                                   dir_class, dir_len, dir_lut)
            if s > 0:
                result = steps
                break
    _fill(jm, x, y, z, dx, dy, dz, d, steps if result < 0 else result, result, ny, nz)
    if result < 0:
        jm[(cx * ny + cy) * nz + cz, d] = -1
    return result


@njit(cache=True)
def _jump(cells, cube, fc, jm, x, y, z, d, goal, natural, dirs, dir_class, dir_len, dir_lut):
    if dir_class[d] == 0:
        s = _jump_3d(cells, cube, fc, jm, x, y, z, d, goal, natural, dirs, dir_class,
                     dir_len, dir_lut)
    elif dir_class[d] == 1:
        s = _jump_planar(cells, cube, fc, jm, x, y, z, d, goal, natural, dirs, dir_class,
                         dir_len, dir_lut)
    else:
        s = _jump_straight(cells, cube, fc, jm, x, y, z, d, goal, natural, dirs, dir_class,
                           dir_len, dir_lut)
    return s, x + s * dirs[d, 0], y + s * dirs[d, 1], z + s * dirs[d, 2]


@njit(cache=True)
def _heuristic(x, y, z, goal):
    return np.sqrt((x - goal[0]) ** 2 + (y - goal[1]) ** 2 + (z - goal[2]) ** 2)


@njit(cache=True)
def _unwind(parent, nodes_goal, ny, nz):
    chain = []
    cur = nodes_goal
    while cur >= 0:
        chain.append(cur)
        cur = parent[cur]
    out = np.empty((len(chain), 3), np.int64)
    for i in range(len(chain)):
        v = chain[len(chain) - 1 - i]
        out[i, 0] = v // (ny * nz)
        out[i, 1] = (v // nz) % ny
        out[i, 2] = v % nz
    return out


@njit(cache=True)
def jps_kernel(cells, start, goal, natural, dirs, dir_class, dir_len, dir_lut):
    """Return (cost in voxel units, jump points) or (-1, empty) without a path."""
    nx, ny, nz = cells.shape
    n_all = nx * ny * nz
    best = np.full(n_all, np.inf)
    parent = np.full(n_all, -1, np.int64)
    pushed = np.zeros(n_all, np.int64)
    expanded = np.zeros(n_all, np.int64)
    s_id = (start[0] * ny + start[1]) * nz + start[2]
    g_id = (goal[0] * ny + goal[1]) * nz + goal[2]
    best[s_id] = 0.0
    start_bit = np.int64(1) << np.int64(dirs.shape[0])
    pushed[s_id] = start_bit
    heap = [(_heuristic(start[0], start[1], start[2], goal), 0.0, s_id, np.int64(-1))]
    cube = _cube_table(cells)
    fc = np.full((n_all, dirs.shape[0]), -1, np.int8)
    jm = np.full((n_all, dirs.shape[0]), UNSEEN, np.int16)
    while len(heap) > 0:
        f, g, nid, d = heapq.heappop(heap)
        if g > best[nid] + 1e-9:
            continue
        bit = start_bit if d < 0 else np.int64(1) << d
        if expanded[nid] & bit:
            continue
        expanded[nid] |= bit
        if nid == g_id:
            return g, _unwind(parent, g_id, ny, nz)
        x = nid // (ny * nz)
        y = (nid // nz) % ny
        z = nid % nz
        if d >= 0 and cube[x, y, z]:
            succ = natural[d]
        else:
            succ = successors(cells, x, y, z, d, natural, dirs, dir_class, dir_len, dir_lut)
        for e in range(dirs.shape[0]):
            if (succ >> e) & 1 == 0:
                continue
            steps, jx, jy, jz = _jump(cells, cube, fc, jm, x, y, z, e, goal, natural, dirs,
                                      dir_class, dir_len, dir_lut)
            if steps <= 0:
                continue
            gn = g + steps * dir_len[e]
            jid = (jx * ny + jy) * nz + jz
            ebit = np.int64(1) << np.int64(e)
            if gn < best[jid] - 1e-9:
                best[jid] = gn
                parent[jid] = nid
                pushed[jid] = ebit
                expanded[jid] = 0
            elif abs(gn - best[jid]) <= 1e-9 and (pushed[jid] & ebit) == 0:
                pushed[jid] |= ebit
            else:
                continue
            heapq.heappush(heap, (gn + _heuristic(jx, jy, jz, goal), gn, jid, np.int64(e)))
    return -1.0, np.empty((0, 3), np.int64)


@njit(cache=True)
def weighted_astar_kernel(cells, mask, potential, w_pot, start, goal, dirs, dir_len):
    """A* over ``mask`` voxels with edge cost ``|e| + w_pot * potential[target]``."""
    nx, ny, nz = cells.shape
    n_all = nx * ny * nz
    best = np.full(n_all, np.inf)
    parent = np.full(n_all, -1, np.int64)
    closed = np.zeros(n_all, np.bool_)
    s_id = (start[0] * ny + start[1]) * nz + start[2]
    g_id = (goal[0] * ny + goal[1]) * nz + goal[2]
    best[s_id] = 0.0
    heap = [(_heuristic(start[0], start[1], start[2], goal), 0.0, s_id)]
    while len(heap) > 0:
        f, g, nid = heapq.heappop(heap)
        if closed[nid]:
            continue
        closed[nid] = True
        if nid == g_id:
            return g, _unwind(parent, g_id, ny, nz)
        x = nid // (ny * nz)
        y = (nid // nz) % ny
        z = nid % nz
        for e in range(dirs.shape[0]):
            mx = x + dirs[e, 0]
            my = y + dirs[e, 1]
            mz = z + dirs[e, 2]
            if mx < 0 or my < 0 or mz < 0 or mx >= nx or my >= ny or mz >= nz:
                continue
            if not mask[mx, my, mz]:
                continue
            mid = (mx * ny + my) * nz + mz
            if closed[mid]:
                continue
            if not admissible(cells, x, y, z, dirs[e, 0], dirs[e, 1], dirs[e, 2]):
                continue
            gn = g + dir_len[e] + w_pot * potential[mx, my, mz]
            if gn < best[mid]:
                best[mid] = gn
                parent[mid] = nid
                heapq.heappush(heap, (gn + _heuristic(mx, my, mz, goal), gn, mid))
    return -1.0, np.empty((0, 3), np.int64)


def jps(cells, start, goal):
    start = np.asarray(start, np.int64)
    goal = np.asarray(goal, np.int64)
    return jps_kernel(cells, start, goal, NATURAL, DIRS, DIR_CLASS, DIR_LEN, DIR_LUT)


def weighted_astar(cells, mask, potential, w_pot, start, goal):
    return weighted_astar_kernel(cells, mask, potential, float(w_pot),
                                 np.asarray(start, np.int64), np.asarray(goal, np.int64),
                                 DIRS, DIR_LEN)
