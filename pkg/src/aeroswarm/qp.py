"""Dense strictly convex QP solver (Goldfarb-Idnani dual active set).

Solves::

    minimize    0.5 x'Gx + g'x
    subject to  E x = e
                C x <= c

``G`` must be symmetric positive definite.  The implementation follows the
classical dual method: start from the unconstrained minimum, add the most
violated constraint, and take primal/dual steps while maintaining the
factorization ``J = L^-T Q`` and the triangular ``R`` of the active normals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

OPTIMAL = 0
INFEASIBLE = 1
DEGENERATE = 2
NOT_CONVEX = 3
MAX_ITER = 4

_STATUS_NAMES = {OPTIMAL: "optimal", INFEASIBLE: "infeasible", DEGENERATE: "degenerate",
                 NOT_CONVEX: "not_convex", MAX_ITER: "max_iter"}

_EPS = np.finfo(np.float64).eps


@njit(cache=True)
def _cholesky(G):
    n = G.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = G[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return L, False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, n):
            t = G[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    return L, True


@njit(cache=True)
def _inv_lower(L):
    n = L.shape[0]
    Li = np.zeros((n, n))
    for c in range(n):
        for i in range(c, n):
            s = 1.0 if i == c else 0.0
            for k in range(c, i):
                s -= L[i, k] * Li[k, c]
            Li[i, c] = s / L[i, i]
    return Li


@njit(cache=True)
def _hypot(a, b):
    a1 = abs(a)
    b1 = abs(b)
    if a1 > b1:
        t = b1 / a1
        return a1 * np.sqrt(1.0 + t * t)
    if b1 > a1:
        t = a1 / b1
        return b1 * np.sqrt(1.0 + t * t)
    return a1 * np.sqrt(2.0)


@njit(cache=True)
def _update_z(z, J, d, iq):
    n = J.shape[0]
    for i in range(n):
        s = 0.0
        for j in range(iq, n):
            s += J[i, j] * d[j]
        z[i] = s


@njit(cache=True)
def _update_r(R, r, d, iq):
    for i in range(iq - 1, -1, -1):
        s = 0.0
        for j in range(i + 1, iq):
            s += R[i, j] * r[j]
        r[i] = (d[i] - s) / R[i, i]


@njit(cache=True)
def _add_constraint(R, J, d, iq, r_norm):
    """Rotate ``d`` so only its first iq+1 entries are nonzero; returns (ok, r_norm)."""
    n = d.shape[0]
    for j in range(n - 1, iq, -1):
        cc = d[j - 1]
        ss = d[j]
        h = _hypot(cc, ss)
        if abs(h) < _EPS:
            continue
        d[j] = 0.0
        ss = ss / h
        cc = cc / h
        if cc < 0.0:
            cc = -cc
            ss = -ss
            d[j - 1] = -h
        else:
            d[j - 1] = h
        xny = ss / (1.0 + cc)
        for k in range(n):
            t1 = J[k, j - 1]
            t2 = J[k, j]
            J[k, j - 1] = t1 * cc + t2 * ss
            J[k, j] = xny * (t1 + J[k, j - 1]) - t2
    for i in range(iq + 1):
        R[i, iq] = d[i]
    if abs(d[iq]) <= _EPS * r_norm:
        return False, r_norm
    return True, max(r_norm, abs(d[iq]))


@njit(cache=True)
def _delete_constraint(R, J, A, u, n_eq, iq, l):
    """Remove inequality ``l`` from the active set; returns the new iq."""
    n = J.shape[0]
    qq = -1
    for i in range(n_eq, iq):
        if A[i] == l:
            qq = i
            break
    if qq < 0:
        return iq
    for i in range(qq, iq - 1):
        A[i] = A[i + 1]
        u[i] = u[i + 1]
        for j in range(n):
            R[j, i] = R[j, i + 1]
    A[iq - 1] = A[iq]
    u[iq - 1] = u[iq]
    A[iq] = 0
    u[iq] = 0.0
    for j in range(iq):
        R[j, iq - 1] = 0.0
    iq -= 1
    if iq == 0:
        return iq
    for j in range(qq, iq):
        cc = R[j, j]
        ss = R[j + 1, j]
        h = _hypot(cc, ss)
        if abs(h) < _EPS:
            continue
        cc = cc / h
        ss = ss / h
        R[j + 1, j] = 0.0
        if cc < 0.0:
            R[j, j] = -h
            cc = -cc
            ss = -ss
        else:
            R[j, j] = h
        xny = ss / (1.0 + cc)
        for k in range(j + 1, iq):
            t1 = R[j, k]
            t2 = R[j + 1, k]
            R[j, k] = t1 * cc + t2 * ss
            R[j + 1, k] = xny * (t1 + R[j, k]) - t2
        for k in range(n):
            t1 = J[k, j]
            t2 = J[k, j + 1]
            J[k, j] = t1 * cc + t2 * ss
            J[k, j + 1] = xny * (J[k, j] + t1) - t2
    return iq


@njit(cache=True)
def gi_solve(G, g0, CE, ce0, CI, ci0, max_iter):
    """Goldfarb-Idnani on ``CE x + ce0 = 0``, ``CI x + ci0 >= 0``.

    Returns (status, x, f, active, u, n_active, iterations).
    """
    n = G.shape[0]
    p = CE.shape[0]
    m = CI.shape[0]
    x = np.zeros(n)
    u = np.zeros(m + p + 1)
    A = np.zeros(m + p + 1, np.int64)
    active_out = np.zeros(0, np.int64)
    L, ok = _cholesky(G)
    if not ok:
        return NOT_CONVEX, x, np.inf, active_out, u, 0, 0
    c1 = 0.0
    for i in range(n):
        c1 += G[i, i]
    J = _inv_lower(L).T.copy()
    c2 = 0.0
    for i in range(n):
        c2 += J[i, i]
    R = np.zeros((n, n))
    r_norm = 1.0
    d = np.zeros(n)
    z = np.zeros(n)
    r = np.zeros(m + p + 1)
    # unconstrained minimum x = -G^-1 g0 = -J J' g0
    tmp = J.T @ g0
    x = -(J @ tmp)
    f = 0.5 * (g0 @ x)
    iq = 0
    for i in range(p):
        npv = CE[i]
        d[:] = J.T @ npv
        _update_z(z, J, d, iq)
        _update_r(R, r, d, iq)
        t2 = 0.0
        zn = z @ npv
        if abs(z @ z) > _EPS:
            t2 = (-(npv @ x) - ce0[i]) / zn
        x += t2 * z
        u[iq] = t2
        for k in range(iq):
            u[k] -= t2 * r[k]
        f += 0.5 * t2 * t2 * zn
        A[i] = -i - 1
        ok, r_norm = _add_constraint(R, J, d, iq, r_norm)
        if not ok:
            return DEGENERATE, x, f, active_out, u, iq, 0
        iq += 1
    iai = np.zeros(m, np.int64)
    iaexcl = np.ones(m, np.bool_)
    for i in range(m):
        iai[i] = i
    s = np.zeros(m)
    u_old = np.zeros(m + p + 1)
    A_old = np.zeros(m + p + 1, np.int64)
    x_old = np.zeros(n)
    it = 0
    status = OPTIMAL
    finished = False
    while not finished:
        it += 1
        if it > max_iter:
            status = MAX_ITER
            break
        for i in range(p, iq):
            iai[A[i]] = -1
        psi = 0.0
        for i in range(m):
            iaexcl[i] = True
            s[i] = CI[i] @ x + ci0[i]
            psi += min(0.0, s[i])
        if abs(psi) <= m * _EPS * c1 * c2 * 100.0:
            break
        for i in range(iq):
            u_old[i] = u[i]
            A_old[i] = A[i]
        x_old[:] = x
        goto_l1 = False
        while not goto_l1:
            ss = 0.0
            ip = -1
            for i in range(m):
                if s[i] < ss and iai[i] != -1 and iaexcl[i]:
                    ss = s[i]
                    ip = i
            if ip < 0:
                finished = True
                break
            npv = CI[ip]
            u[iq] = 0.0
            A[iq] = ip
            inner = 0
            goto_l2 = False
            while True:
                inner += 1
                if inner > max_iter:
                    return MAX_ITER, x, f, active_out, u, iq, it
                d[:] = J.T @ npv
                _update_z(z, J, d, iq)
                _update_r(R, r, d, iq)
                l = -1
                t1 = np.inf
                for k in range(p, iq):
                    if r[k] > 0.0 and u[k] / r[k] < t1:
                        t1 = u[k] / r[k]
                        l = A[k]
                if abs(z @ z) > _EPS:
                    t2 = -s[ip] / (z @ npv)
                else:
                    t2 = np.inf
                t = min(t1, t2)
                if t >= np.inf:
                    return INFEASIBLE, x, f, active_out, u, iq, it
                if t2 >= np.inf:
                    for k in range(iq):
                        u[k] -= t * r[k]
                    u[iq] += t
                    iai[l] = l
                    iq = _delete_constraint(R, J, A, u, p, iq, l)
                    continue
                x += t * z
                f += t * (z @ npv) * (0.5 * t + u[iq])
                for k in range(iq):
                    u[k] -= t * r[k]
                u[iq] += t
                if abs(t - t2) < _EPS:
                    ok, r_norm = _add_constraint(R, J, d, iq, r_norm)
                    if not ok:
                        iaexcl[ip] = False
                        iq = _delete_constraint(R, J, A, u, p, iq + 1, ip)
                        for i in range(m):
                            iai[i] = i
                        for i in range(p, iq):
                            A[i] = A_old[i]
                            u[i] = u_old[i]
                            iai[A[i]] = -1
                        x[:] = x_old
                        goto_l2 = True
                        break
                    iq += 1
                    iai[ip] = -1
                    goto_l1 = True
                    break
                iai[l] = l
                iq = _delete_constraint(R, J, A, u, p, iq, l)
                s[ip] = CI[ip] @ x + ci0[ip]
            if goto_l2:
                continue
    active_out = A[:iq].copy()
    return status, x, f, active_out, u, iq, it


@dataclass
class QPResult:
    status: str
    x: np.ndarray
    objective: float
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def solve_qp(G, g, E=None, e=None, C=None, c=None, max_iter: int = 2000) -> QPResult:
    """Solve ``min 0.5 x'Gx + g'x`` s.t. ``E x = e`` and ``C x <= c``.

    Multipliers follow the convention ``G x + g + E' nu + C' lam = 0`` with
    ``lam >= 0`` at an optimum.
    """
    G = np.ascontiguousarray(G, dtype=float)
    g = np.ascontiguousarray(g, dtype=float).reshape(-1)
    n = len(g)
    E = np.zeros((0, n)) if E is None else np.ascontiguousarray(E, dtype=float).reshape(-1, n)
    e = np.zeros(0) if e is None else np.ascontiguousarray(e, dtype=float).reshape(-1)
    C = np.zeros((0, n)) if C is None else np.ascontiguousarray(C, dtype=float).reshape(-1, n)
    c = np.zeros(0) if c is None else np.ascontiguousarray(c, dtype=float).reshape(-1)
    status, x, f, active, u, iq, it = gi_solve(G, g, E, -e, np.ascontiguousarray(-C), c,
                                               max_iter)
    nu = np.zeros(len(e))
    lam = np.zeros(len(c))
    for k in range(len(active)):
        j = active[k]
        if j < 0:
            nu[-j - 1] = -u[k]
        else:
            lam[j] = u[k]
    return QPResult(_STATUS_NAMES[int(status)], x, float(f), nu, lam, int(it))
