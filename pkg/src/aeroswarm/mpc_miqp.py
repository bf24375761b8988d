"""Jerk-controlled MPC with polyhedral corridor membership (MIQP).

The QP over the stacked jerk inputs ``U`` is condensed: states are affine in
``U`` through cached prediction matrices of the Euler-discretized triple
integrator with linear drag.  Corridor membership is disjunctive per step;
a best-first branch and bound over the membership binaries solves it, with
big-M relaxations at each node and exact QPs once every step is assigned.
"""

from __future__ import annotations

import functools
import heapq
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .qp import solve_qp

STATE_DIM = 9
BIN_EPS = 1e-8
MEMBER_TOL = 1e-9
P0_TOL = 1e-7


@dataclass
class AgentState:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, float).reshape(3)
        self.v = np.asarray(self.v, float).reshape(3)
        self.a = np.asarray(self.a, float).reshape(3)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, self.a])

    @classmethod
    def from_vector(cls, x) -> "AgentState":
        x = np.asarray(x, float)
        return cls(x[0:3], x[3:6], x[6:9])


@dataclass
class Trajectory:
    states: np.ndarray
    inputs: np.ndarray
    h: float
    stamp: int = 0

    def __post_init__(self):
        self.states = np.asarray(self.states, float).reshape(-1, STATE_DIM)
        self.inputs = np.asarray(self.inputs, float).reshape(-1, 3)

    @property
    def N(self) -> int:
        return len(self.inputs)

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, 0:3]

    @property
    def velocities(self) -> np.ndarray:
        return self.states[:, 3:6]

    @property
    def accelerations(self) -> np.ndarray:
        return self.states[:, 6:9]

    def state(self, k: int) -> AgentState:
        return AgentState.from_vector(self.states[k])

    def dynamics_residual(self, drag) -> float:
        sim = simulate(self.states[0], self.inputs, self.h, drag)
        return float(np.max(np.abs(sim - self.states)))

    def shifted(self, stamp: int | None = None) -> "Trajectory":
        """Drop the first step and hold the final rest state for one more step."""
        last = self.states[-1].copy()
        last[3:] = 0.0
        states = np.vstack([self.states[1:], last])
        inputs = np.vstack([self.inputs[1:], np.zeros((1, 3))])
        return Trajectory(states, inputs, self.h, self.stamp if stamp is None else stamp)


def rest_trajectory(p, N: int, h: float, stamp: int = 0) -> Trajectory:
    x = np.zeros(STATE_DIM)
    x[0:3] = p
    return Trajectory(np.tile(x, (N + 1, 1)), np.zeros((N, 3)), h, stamp)


@dataclass
class DynamicLimits:
    a_x_max: float
    a_y_max: float
    a_z_min: float
    a_z_max: float
    j_x_max: float
    j_y_max: float
    j_z_max: float
    drag: np.ndarray

    def __post_init__(self):
        self.drag = np.asarray(self.drag, float).reshape(3)
        if not (self.a_z_min < 0 < self.a_z_max):
            raise ConfigurationError("need a_z_min < 0 < a_z_max")
        if min(self.a_x_max, self.a_y_max, self.j_x_max, self.j_y_max, self.j_z_max) <= 0:
            raise ConfigurationError("acceleration and jerk limits must be positive")
        if np.any(self.drag < 0):
            raise ConfigurationError("drag must be non-negative")

    @classmethod
    def symmetric(cls, a_max: float, j_max: float, v_cap: float) -> "DynamicLimits":
        """Equal limits on every axis with drag ``a_max / v_cap``."""
        return cls(a_max, a_max, -a_max, a_max, j_max, j_max, j_max,
                   np.full(3, a_max / v_cap))

    @property
    def a_lo(self) -> np.ndarray:
        return np.array([-self.a_x_max, -self.a_y_max, self.a_z_min])

    @property
    def a_hi(self) -> np.ndarray:
        return np.array([self.a_x_max, self.a_y_max, self.a_z_max])

    @property
    def j_max(self) -> np.ndarray:
        return np.array([self.j_x_max, self.j_y_max, self.j_z_max])


@dataclass
class CostWeights:
    R_x: np.ndarray = field(default_factory=lambda: np.array([10.0] * 3 + [1.0] * 3 + [0.01] * 3))
    R_N: np.ndarray = field(default_factory=lambda: 10.0 * np.array([10.0] * 3 + [1.0] * 3
                                                                     + [0.01] * 3))
    R_u: np.ndarray = field(default_factory=lambda: np.full(3, 0.01))

    def __post_init__(self):
        self.R_x = np.asarray(self.R_x, float).reshape(STATE_DIM)
        self.R_N = np.asarray(self.R_N, float).reshape(STATE_DIM)
        self.R_u = np.asarray(self.R_u, float).reshape(3)
        if np.any(self.R_x < 0) or np.any(self.R_N < 0):
            raise ConfigurationError("state weights must be non-negative")
        if np.any(self.R_u <= 0):
            raise ConfigurationError("input weights must be positive")


def step_dynamics(x: AgentState, u, h: float, drag) -> AgentState:
    u = np.asarray(u, float)
    drag = np.asarray(drag, float)
    return AgentState(x.p + h * x.v, x.v + h * (x.a - drag * x.v), x.a + h * u)


def _transition(h: float, drag) -> tuple[np.ndarray, np.ndarray]:
    I3 = np.eye(3)
    A = np.zeros((STATE_DIM, STATE_DIM))
    A[0:3, 0:3] = I3
    A[0:3, 3:6] = h * I3
    A[3:6, 3:6] = I3 - h * np.diag(drag)
    A[3:6, 6:9] = h * I3
    A[6:9, 6:9] = I3
    B = np.zeros((STATE_DIM, 3))
    B[6:9, :] = h * I3
    return A, B


def simulate(x0, inputs, h: float, drag) -> np.ndarray:
    A, B = _transition(h, np.asarray(drag, float))
    xs = [np.asarray(x0, float).copy()]
    for u in np.asarray(inputs, float).reshape(-1, 3):
        xs.append(A @ xs[-1] + B @ u)
    return np.array(xs)


@functools.lru_cache(maxsize=32)
def _prediction(h: float, drag: tuple, N: int):
    """Stacked ``X = Phi x0 + Gamma U`` for k = 0..N."""
    A, B = _transition(h, np.array(drag))
    Phi = np.zeros(((N + 1) * STATE_DIM, STATE_DIM))
    Gam = np.zeros(((N + 1) * STATE_DIM, 3 * N))
    Ak = np.eye(STATE_DIM)
    for k in range(N + 1):
        Phi[k * 9:(k + 1) * 9] = Ak
        Ak = A @ Ak
    for k in range(1, N + 1):
        prev = Gam[(k - 1) * 9:k * 9]
        Gam[k * 9:(k + 1) * 9] = A @ prev
        Gam[k * 9:(k + 1) * 9, 3 * (k - 1):3 * k] += B
    Phi.setflags(write=False)
    Gam.setflags(write=False)
    return Phi, Gam


@functools.lru_cache(maxsize=32)
def _cost_matrices(h: float, drag: tuple, N: int, R_x: tuple, R_N: tuple, R_u: tuple):
    Phi, Gam = _prediction(h, drag, N)
    q = np.tile(np.array(R_x), N + 1)
    q[N * 9:] += np.array(R_N)
    H = 2.0 * (Gam.T * q) @ Gam + 2.0 * np.diag(np.tile(np.array(R_u), N))
    H = 0.5 * (H + H.T)
    W = 2.0 * Gam.T * q
    H.setflags(write=False)
    W.setflags(write=False)
    return H, W, q


@dataclass
class PolyRows:
    """Rows of one polyhedron applied to the points of a step, as ``C U <= d``."""
    poly: int
    C: np.ndarray
    d: np.ndarray


@dataclass
class MiqpProblem:
    N: int
    h: float
    drag: np.ndarray
    x0: np.ndarray
    ref_states: np.ndarray
    H: np.ndarray
    g: np.ndarray
    const: float
    E: np.ndarray
    e: np.ndarray
    C_hard: np.ndarray
    c_hard: np.ndarray
    groups: list
    M_big: float
    n_binaries: int
    infeasible_reason: str | None = None

    @property
    def n_vars(self) -> int:
        return 3 * self.N

    def objective(self, U) -> float:
        U = np.asarray(U, float)
        return float(0.5 * U @ self.H @ U + self.g @ U + self.const)

    def states(self, U) -> np.ndarray:
        return simulate(self.x0, np.asarray(U).reshape(-1, 3), self.h, self.drag)


def _common_rows(polys):
    """Rows (a, c) present in every polyhedron of the list, and the per-poly rest."""
    first = polys[0]
    common = []
    for i in range(len(first.c)):
        a, c = first.A[i], first.c[i]
        if all(np.any(np.all(P.A == a, axis=1) & (P.c == c)) for P in polys[1:]):
            common.append(i)
    common_A = first.A[common]
    common_c = first.c[common]
    rest = []
    for P in polys:
        keep = [i for i in range(len(P.c))
                if not np.any(np.all(common_A == P.A[i], axis=1) & (common_c == P.c[i]))]
        rest.append((P.A[keep], P.c[keep]))
    return common_A, common_c, rest


def _point_rows(A, c, k, Phi, Gam, x0):
    """Rows of ``A p_k <= c`` in terms of U; None for the fixed point k = 0."""
    Pk = Gam[k * 9:k * 9 + 3]
    pk0 = Phi[k * 9:k * 9 + 3] @ x0
    return A @ Pk, c - A @ pk0


def _poly_nonempty(A, c) -> bool:
    if len(c) == 0:
        return True
    res = solve_qp(np.eye(3) * 1e-6, np.zeros(3), C=A, c=c)
    return res.ok


def build_problem(x0, ref, tasc, limits: DynamicLimits, weights: CostWeights,
                  M_big: float = 116.0, h: float | None = None) -> MiqpProblem:
    """Condensed MIQP data for one planning iteration.

    ``ref`` supplies N+1 reference positions and velocities; ``tasc`` holds one
    corridor per step k (constraining p_k and p_k+1).
    """
    if isinstance(x0, AgentState):
        x0 = x0.as_vector()
    x0 = np.asarray(x0, float).reshape(STATE_DIM)
    ref_states = ref.states() if hasattr(ref, "states") else np.asarray(ref, float)
    N = len(ref_states) - 1
    if N < 1:
        raise ConfigurationError("reference needs at least two states")
    if h is None:
        h = float(getattr(ref, "h", 0.1))
    corridors = tasc.corridors if hasattr(tasc, "corridors") else list(tasc)
    if len(corridors) > N:
        raise ConfigurationError(f"{len(corridors)} corridors for a horizon of {N}")
    drag = tuple(float(v) for v in limits.drag)
    Phi, Gam = _prediction(float(h), drag, N)
    H, W, q = _cost_matrices(float(h), drag, N, tuple(weights.R_x), tuple(weights.R_N),
                             tuple(weights.R_u))
    resid = Phi @ x0 - ref_states.reshape(-1)
    g = W @ resid
    const = float(resid @ (q * resid))
    nU = 3 * N
    # terminal rest
    E = Gam[N * 9 + 3:N * 9 + 9].copy()
    e = -(Phi[N * 9 + 3:N * 9 + 9] @ x0)
    rows_C = [np.eye(nU), -np.eye(nU)]
    rows_c = [np.tile(limits.j_max, N), np.tile(limits.j_max, N)]
    a_lo, a_hi = limits.a_lo, limits.a_hi
    for k in range(1, N):
        Ak = Gam[k * 9 + 6:k * 9 + 9]
        ak0 = Phi[k * 9 + 6:k * 9 + 9] @ x0
        rows_C += [Ak, -Ak]
        rows_c += [a_hi - ak0, ak0 - a_lo]
    reason = None
    n_bin = 0
    groups = []
    for k, polys in enumerate(corridors):
        n_bin += len(polys)
        if not polys:
            reason = reason or f"corridor {k} is empty"
            groups.append([])
            continue
        cA, cc, rest = _common_rows(polys)
        for j in (k, k + 1):
            if j == 0:
                if len(cc) and np.any(cA @ x0[:3] - cc > P0_TOL):
                    reason = reason or "initial position violates separating planes"
                continue
            Cj, dj = _point_rows(cA, cc, j, Phi, Gam, x0)
            rows_C.append(Cj)
            rows_c.append(dj)
        opts = []
        for pi, (rA, rc) in enumerate(rest):
            if k == 0 and len(rc) and np.any(rA @ x0[:3] - rc > P0_TOL):
                continue
            fullA = np.vstack([cA, rA])
            fullc = np.concatenate([cc, rc])
            if not _poly_nonempty(fullA, fullc):
                continue
            blocks_C, blocks_d = [], []
            for j in (k, k + 1):
                if j == 0:
                    continue
                Cj, dj = _point_rows(rA, rc, j, Phi, Gam, x0)
                blocks_C.append(Cj)
                blocks_d.append(dj)
            opts.append(PolyRows(pi, np.vstack(blocks_C).reshape(-1, nU),
                                 np.concatenate(blocks_d)))
        if not opts:
            reason = reason or f"no usable polyhedron at step {k}"
        groups.append(opts)
    C_hard = np.vstack(rows_C)
    c_hard = np.concatenate(rows_c)
    return MiqpProblem(N, float(h), np.array(drag), x0, ref_states, H, g, const, E, e,
                       C_hard, c_hard, groups, float(M_big), n_bin, reason)


@dataclass
class SolveResult:
    trajectory: Trajectory | None
    status: str
    objective: float = float("inf")
    U: np.ndarray | None = None
    assignment: list | None = None
    nodes: int = 0
    qp_solves: int = 0
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return self.trajectory is not None


class SolveFailure(RuntimeError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _dedup_rows(C, c):
    if len(c) < 2:
        return C, c
    M = np.hstack([C, c[:, None]])
    _, idx = np.unique(M, axis=0, return_index=True)
    idx.sort()
    return C[idx], c[idx]


def _assignment_qp(prob: MiqpProblem, assign):
    """Exact QP with step k restricted to polyhedron option ``assign[k]``."""
    Cs = [prob.C_hard]
    cs = [prob.c_hard]
    for k, opt in enumerate(assign):
        o = prob.groups[k][opt]
        Cs.append(o.C)
        cs.append(o.d)
    C, c = _dedup_rows(np.vstack(Cs), np.concatenate(cs))
    return solve_qp(prob.H, prob.g, prob.E, prob.e, C, c)


def _node_qp(prob: MiqpProblem, allowed, fixed):
    """Relaxation with big-M rows for unassigned steps; returns (result, free_list)."""
    nU = prob.n_vars
    Cs = [prob.C_hard]
    cs = [prob.c_hard]
    free = []
    for k, opts in enumerate(prob.groups):
        cand = [i for i in range(len(opts)) if allowed[k] >> i & 1]
        if fixed[k] >= 0:
            cand = [fixed[k]]
        if len(cand) == 1:
            o = opts[cand[0]]
            Cs.append(o.C)
            cs.append(o.d)
        else:
            free.append((k, cand))
    nb = sum(len(c) for _, c in free)
    if nb == 0:
        C, c = _dedup_rows(np.vstack(Cs), np.concatenate(cs))
        return solve_qp(prob.H, prob.g, prob.E, prob.e, C, c), free
    n = nU + nb
    G = np.zeros((n, n))
    G[:nU, :nU] = prob.H
    G[nU:, nU:] = np.eye(nb) * (2.0 * BIN_EPS)
    gg = np.concatenate([prob.g, np.zeros(nb)])
    E = np.hstack([prob.E, np.zeros((len(prob.e), nb))])
    hardC, hardc = _dedup_rows(np.vstack(Cs), np.concatenate(cs))
    rows = [np.hstack([hardC, np.zeros((len(hardc), nb))])]
    rhs = [hardc]
    bi = 0
    M = prob.M_big
    for k, cand in free:
        s_row = np.zeros(n)
        for i in cand:
            o = prob.groups[k][i]
            r = np.zeros((len(o.d), n))
            r[:, :nU] = o.C
            r[:, nU + bi] = M
            rows.append(r)
            rhs.append(o.d + M)
            s_row[nU + bi] = -1.0
            bi += 1
        rows.append(s_row[None, :])
        rhs.append(np.array([-1.0]))
    bounds = np.zeros((2 * nb, n))
    bounds[:nb, nU:] = np.eye(nb)
    bounds[nb:, nU:] = -np.eye(nb)
    rows.append(bounds)
    rhs.append(np.concatenate([np.ones(nb), np.zeros(nb)]))
    return solve_qp(G, gg, E, prob.e, np.vstack(rows), np.concatenate(rhs)), free


def _violation(o: PolyRows, U) -> float:
    if len(o.d) == 0:
        return 0.0
    return float(np.max(o.C @ U - o.d))


def _round(prob: MiqpProblem, U, free):
    """Complete assignment satisfied by ``U`` for the free steps, if one exists."""
    out = {}
    for k, cand in free:
        best = None
        for i in cand:
            if _violation(prob.groups[k][i], U) <= MEMBER_TOL:
                best = i
                break
        if best is None:
            return None
        out[k] = best
    return out


def _full_assignment(allowed, fixed, extra):
    assign = []
    for k in range(len(fixed)):
        if fixed[k] >= 0:
            assign.append(fixed[k])
        elif k in extra:
            assign.append(extra[k])
        else:
            cand = [i for i in range(64) if allowed[k] >> i & 1]
            assign.append(cand[0])
    return assign


def _make_trajectory(prob: MiqpProblem, U, stamp: int = 0) -> Trajectory:
    states = prob.states(U)
    states[-1, 3:] = 0.0
    return Trajectory(states, np.asarray(U).reshape(-1, 3).copy(), prob.h, stamp)


def solve(problem: MiqpProblem, budget: float | None = None, max_nodes: int = 2000,
          warm_assignment: list | None = None) -> SolveResult:
    """Best-first branch and bound over polyhedron membership.

    Returns the optimal incumbent when the tree is exhausted, the best incumbent
    when the wall-clock ``budget`` or ``max_nodes`` runs out, and a failed
    result (status ``infeasible`` or ``timeout``) otherwise.
    """
    t0 = time.perf_counter()
    deadline = None if budget is None else t0 + budget
    prob = problem
    if prob.infeasible_reason is not None:
        return SolveResult(None, "infeasible", elapsed=time.perf_counter() - t0)
    K = len(prob.groups)
    allowed0 = [(1 << len(g)) - 1 for g in prob.groups]
    fixed0 = [-1] * K
    best = [np.inf, None, None]
    qp_count = 0

    def offer(U, assign):
        f = prob.objective(U)
        if f < best[0] - 1e-12:
            best[0], best[1], best[2] = f, U.copy(), list(assign)

    if warm_assignment is not None and len(warm_assignment) == K:
        if all(0 <= a < len(prob.groups[k]) for k, a in enumerate(warm_assignment)):
            res = _assignment_qp(prob, warm_assignment)
            qp_count += 1
            if res.ok:
                offer(res.x, warm_assignment)

    heap = []
    counter = 0
    nodes = 0
    status = "optimal"

    def evaluate(allowed, fixed):
        nonlocal qp_count, counter
        res, free = _node_qp(prob, allowed, fixed)
        qp_count += 1
        if not res.ok:
            return
        U = res.x[:prob.n_vars]
        nb = sum(len(c) for _, c in free)
        bound = res.objective + prob.const
        if not free:
            offer(U, _full_assignment(allowed, fixed, {}))
            return
        rounded = _round(prob, U, free)
        if rounded is not None:
            offer(U, _full_assignment(allowed, fixed, rounded))
            return
        lower = bound - BIN_EPS * nb
        if lower >= best[0] - 1e-9 * max(1.0, abs(best[0])):
            return
        counter += 1
        heapq.heappush(heap, (lower, counter, allowed, fixed, U, free))

    evaluate(allowed0, fixed0)
    first_dive = True
    while heap:
        if deadline is not None and time.perf_counter() > deadline:
            status = "budget"
            break
        if nodes >= max_nodes:
            status = "node_limit"
            break
        lower, _, allowed, fixed, U, free = heapq.heappop(heap)
        if lower >= best[0] - 1e-9 * max(1.0, abs(best[0])):
            continue
        nodes += 1
        # branch on the step whose points are farthest from every candidate
        viol = []
        for k, cand in free:
            vs = [(_violation(prob.groups[k][i], U), i) for i in cand]
            vs.sort()
            viol.append((vs[0][0], k, vs[0][1]))
        viol.sort(key=lambda t: (-t[0], t[1]))
        _, kb, pb = viol[0]
        if first_dive and best[1] is None:
            # quick incumbent: every free step takes its least-violated candidate
            first_dive = False
            extra = {}
            for k, cand in free:
                extra[k] = min(cand, key=lambda i: (_violation(prob.groups[k][i], U), i))
            assign = _full_assignment(allowed, fixed, extra)
            res = _assignment_qp(prob, assign)
            qp_count += 1
            if res.ok:
                offer(res.x, assign)
        f1 = list(fixed)
        f1[kb] = pb
        evaluate(allowed, f1)
        a0 = list(allowed)
        a0[kb] &= ~(1 << pb)
        if a0[kb]:
            evaluate(a0, fixed)
    elapsed = time.perf_counter() - t0
    if best[1] is None:
        st = "infeasible" if status == "optimal" else "timeout"
        return SolveResult(None, st, nodes=nodes, qp_solves=qp_count, elapsed=elapsed)
    traj = _make_trajectory(prob, best[1])
    return SolveResult(traj, status, best[0], best[1], best[2], nodes, qp_count, elapsed)


def plan_iteration(prev_traj: Trajectory, ref, tasc, limits: DynamicLimits,
                   weights: CostWeights, budget: float | None = None,
                   max_nodes: int = 2000, M_big: float = 116.0):
    """Plan from ``prev_traj.states[1]``; on failure return the shifted previous plan."""
    x0 = prev_traj.states[1]
    prob = build_problem(x0, ref, tasc, limits, weights, M_big=M_big, h=prev_traj.h)
    res = solve(prob, budget=budget, max_nodes=max_nodes,
                warm_assignment=_warm_from_tasc(prev_traj, tasc, prob))
    if res.ok:
        res.trajectory.stamp = prev_traj.stamp + 1
        return res.trajectory, res
    return prev_traj.shifted(prev_traj.stamp + 1), res


def _warm_from_tasc(prev: Trajectory, tasc, prob: MiqpProblem):
    corridors = tasc.corridors if hasattr(tasc, "corridors") else list(tasc)
    pos = prev.positions
    out = []
    for k, opts in enumerate(prob.groups):
        pts = [pos[min(k + 1, len(pos) - 1)], pos[min(k + 2, len(pos) - 1)]]
        pick = None
        for i, o in enumerate(opts):
            P = corridors[k][o.poly]
            if all(P.contains(p, MEMBER_TOL) for p in pts):
                pick = i
                break
        if pick is None:
            return None
        out.append(pick)
    return out


def dump_problem(problem: MiqpProblem, file, result: SolveResult | None = None) -> None:
    """Plain-text interchange: objective, constraint rows, binaries, solution."""
    fmt = lambda v: " ".join(repr(float(x)) for x in np.ravel(v))  # noqa: E731
    lines = [f"MIQP N={problem.N} h={float(problem.h)!r} vars={problem.n_vars} "
             f"binaries={problem.n_binaries} M={float(problem.M_big)!r}"]
    lines.append("OBJECTIVE 0.5*U'HU + g'U + const")
    lines.append(f"CONST {float(problem.const)!r}")
    lines.append("G " + fmt(problem.g))
    for row in problem.H:
        lines.append("H " + fmt(row))
    for row, r in zip(problem.E, problem.e):
        lines.append(f"EQ {fmt(row)} = {float(r)!r}")
    for row, r in zip(problem.C_hard, problem.c_hard):
        lines.append(f"LE {fmt(row)} <= {float(r)!r}")
    for k, opts in enumerate(problem.groups):
        for o in opts:
            lines.append(f"BIN b_{k}_{o.poly} rows={len(o.d)}")
            for row, r in zip(o.C, o.d):
                lines.append(f"IMPLY b_{k}_{o.poly} {fmt(row)} <= {float(r)!r}")
    if result is not None and result.U is not None:
        lines.append(f"SOLUTION status={result.status} objective={float(result.objective)!r}")
        lines.append("U " + fmt(result.U))
        lines.append("ASSIGN " + " ".join(str(problem.groups[k][a].poly)
                                          for k, a in enumerate(result.assignment)))
    Path(file).write_text("\n".join(lines) + "\n")
