"""Independent brute-force reference implementations used by the tests."""

import heapq
import itertools
import math

import numpy as np

MOVES = [d for d in itertools.product((-1, 0, 1), repeat=3) if any(d)]


def _free(cells, v):
    return all(0 <= v[a] < cells.shape[a] for a in range(3)) and cells[v] == 0


def move_ok(cells, a, d):
    """Diagonal moves need a face-connected monotone staircase of free voxels."""
    b = tuple(a[i] + d[i] for i in range(3))
    if not _free(cells, b):
        return False
    axes = [i for i in range(3) if d[i]]
    for order in itertools.permutations(axes):
        cur = list(a)
        ok = True
        for ax in order[:-1]:
            cur[ax] += d[ax]
            if not _free(cells, tuple(cur)):
                ok = False
                break
        if ok:
            return True
    return False


def astar_cost(cells, start, goal, weight=None, mask=None):
    """Plain Dijkstra over the 26-lattice (voxel units)."""
    start, goal = tuple(start), tuple(goal)
    dist = {start: 0.0}
    pq = [(0.0, start)]
    while pq:
        g, u = heapq.heappop(pq)
        if g > dist[u]:
            continue
        if u == goal:
            return g
        for d in MOVES:
            if not move_ok(cells, u, d):
                continue
            v = tuple(u[i] + d[i] for i in range(3))
            if mask is not None and not mask[v]:
                continue
            c = math.sqrt(sum(x * x for x in d))
            if weight is not None:
                c += weight[v]
            if g + c < dist.get(v, math.inf):
                dist[v] = g + c
                heapq.heappush(pq, (g + c, v))
    return None


def path_cost(path):
    path = np.asarray(path, float)
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


# ---------------------------------------------------------------------------
# MIQP oracle: explicit dynamics, one cvxopt QP per membership assignment


def euler_rollout(x0, U, h, drag):
    """States of the drag-damped triple integrator, written out longhand."""
    x = np.array(x0, float)
    out = [x.copy()]
    for u in np.reshape(U, (-1, 3)):
        p, v, a = x[0:3], x[3:6], x[6:9]
        x = np.concatenate([p + h * v, v + h * (a - np.asarray(drag) * v), a + h * np.asarray(u)])
        out.append(x.copy())
    return np.array(out)


def _affine_states(x0, N, h, drag):
    """States as ``base + J U`` by probing the rollout with unit inputs."""
    base = euler_rollout(x0, np.zeros(3 * N), h, drag)
    J = np.zeros((N + 1, 9, 3 * N))
    for i in range(3 * N):
        e = np.zeros(3 * N)
        e[i] = 1.0
        J[:, :, i] = euler_rollout(x0, e, h, drag) - base
    return base, J


def qp_cvxopt(P, q, G=None, hv=None, A=None, b=None):
    """``min 0.5 x'Px + q'x``; returns (x, f) or None when not solved."""
    import cvxopt
    from cvxopt import solvers

    solvers.options.update(show_progress=False, abstol=1e-11, reltol=1e-11, feastol=1e-11,
                           maxiters=200)
    m = lambda M: cvxopt.matrix(np.asarray(M, float))  # noqa: E731
    args = [m(P), m(np.reshape(q, (-1, 1)))]
    kw = {}
    if G is not None and len(hv):
        kw["G"], kw["h"] = m(G), m(np.reshape(hv, (-1, 1)))
    if A is not None and len(b):
        kw["A"], kw["b"] = m(A), m(np.reshape(b, (-1, 1)))
    try:
        sol = solvers.qp(*args, **kw)
    except (ValueError, ArithmeticError):
        return None
    if sol["status"] != "optimal":
        return None
    x = np.array(sol["x"]).ravel()
    return x, float(0.5 * x @ np.asarray(P) @ x + np.asarray(q) @ x)


def enumerate_miqp(x0, ref_states, corridors, j_max, a_lo, a_hi, drag, h, R_x, R_N, R_u,
                   p0_tol=1e-7):
    """Best objective over every polyhedron assignment, or inf if none is feasible."""
    N = len(ref_states) - 1
    base, J = _affine_states(x0, N, h, drag)
    q = np.tile(R_x, (N + 1, 1))
    q[N] += R_N
    # cost = sum_k (base_k + J_k U - ref_k)' Q_k (...) + U' Ru U
    P = 2 * np.diag(np.tile(R_u, N))
    lin = np.zeros(3 * N)
    const = 0.0
    for k in range(N + 1):
        r = base[k] - ref_states[k]
        P += 2 * J[k].T @ (q[k][:, None] * J[k])
        lin += 2 * J[k].T @ (q[k] * r)
        const += float(r @ (q[k] * r))
    G = [np.eye(3 * N), -np.eye(3 * N)]
    hv = [np.tile(j_max, N), np.tile(j_max, N)]
    for k in range(1, N):
        Ja, ba = J[k, 6:9], base[k, 6:9]
        G += [Ja, -Ja]
        hv += [np.asarray(a_hi) - ba, ba - np.asarray(a_lo)]
    Aeq = J[N, 3:9]
    beq = -base[N, 3:9]
    keep = np.linalg.norm(Aeq, axis=1) > 1e-12
    if np.any(np.abs(beq[~keep]) > 1e-9):
        return np.inf
    Aeq, beq = Aeq[keep], beq[keep]
    best = np.inf
    for assign in itertools.product(*[range(len(c)) for c in corridors]):
        Gs, hs = list(G), list(hv)
        ok = True
        for k, i in enumerate(assign):
            poly = corridors[k][i]
            for j in (k, k + 1):
                if j == 0:
                    if np.any(poly.A @ np.asarray(x0)[:3] - poly.c > p0_tol):
                        ok = False
                    continue
                Gs.append(poly.A @ J[j, 0:3])
                hs.append(poly.c - poly.A @ base[j, 0:3])
        if not ok:
            continue
        sol = qp_cvxopt(P, lin, np.vstack(Gs), np.concatenate(hs), Aeq, beq)
        if sol is None:
            continue
        U, f = sol
        # reject solutions cvxopt reports optimal but that violate rows
        if np.max(np.vstack(Gs) @ U - np.concatenate(hs)) > 1e-6:
            continue
        best = min(best, f + const)
    return best


def random_miqp_case(rng, N=None, p_hor=2):
    """A small random planning instance: start at rest, box corridors along a line."""
    from aeroswarm.corridor import Polyhedron

    N = int(rng.integers(2, 6)) if N is None else N
    h = 0.1
    x0 = np.zeros(9)
    x0[0:3] = rng.uniform(-1, 1, 3)
    x0[3:6] = rng.uniform(-0.3, 0.3, 3)
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    speed = rng.uniform(0.5, 3.0)
    ref = np.zeros((N + 1, 9))
    for k in range(N + 1):
        ref[k, 0:3] = x0[0:3] + d * speed * h * (k + 1)
        ref[k, 3:6] = d * speed
    corridors = []
    for k in range(N):
        polys = []
        for _ in range(int(rng.integers(1, p_hor + 1))):
            c = x0[0:3] + d * speed * h * rng.uniform(0, 0.5 * (k + 1)) + rng.normal(0, 0.1, 3)
            half = rng.uniform(0.1, 0.8, 3)
            A = np.vstack([np.eye(3), -np.eye(3)])
            cc = np.concatenate([c + half, -(c - half)])
            if rng.random() < 0.3:
                n = rng.normal(size=3)
                n /= np.linalg.norm(n)
                A = np.vstack([A, n])
                cc = np.append(cc, n @ c + rng.uniform(0, 0.2))
            polys.append(Polyhedron(A, cc))
        if k == 0 and not any(P.contains(x0[0:3]) for P in polys):
            polys[0] = Polyhedron(np.vstack([np.eye(3), -np.eye(3)]),
                                  np.concatenate([x0[0:3] + 0.3, -(x0[0:3] - 0.3)]))
        corridors.append(polys)
    return x0, ref, corridors, h
