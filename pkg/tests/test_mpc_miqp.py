import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeroswarm import mpc_miqp as mpc
from aeroswarm.corridor import Polyhedron, Tasc
from aeroswarm.qp import solve_qp
from aeroswarm.reference import ReferenceTrajectory, stationary_reference
from oracles import enumerate_miqp, euler_rollout, random_miqp_case

LIM = mpc.DynamicLimits.symmetric(20.0, 60.0, 7.5)
W = mpc.CostWeights()


def _box(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return Polyhedron(np.vstack([np.eye(3), -np.eye(3)]), np.concatenate([hi, -lo]))


def _line_ref(N=9, v=2.0, h=0.1):
    pos = np.array([[v * h * k, 0, 0] for k in range(N + 1)], float)
    return ReferenceTrajectory(pos, np.tile([v, 0, 0], (N + 1, 1)), v, h)


class TestDynamics:
    def test_coast(self):
        x = mpc.AgentState([0, 0, 0], [1, 0, 0], [0, 0, 0])
        y = mpc.step_dynamics(x, [0, 0, 0], 0.1, [0, 0, 0])
        assert y.p == pytest.approx([0.1, 0, 0])
        assert y.v == pytest.approx([1, 0, 0])

    def test_jerk_and_drag(self):
        x = mpc.AgentState([0, 0, 0], [2, 0, 0], [0, 0, 1])
        y = mpc.step_dynamics(x, [0, 0, 10], 0.1, [0.5, 0.5, 0.5])
        assert y.v == pytest.approx([2 * (1 - 0.05), 0, 0.1])
        assert y.a == pytest.approx([0, 0, 2])

    def test_simulate_matches_longhand(self):
        rng = np.random.default_rng(1)
        x0 = rng.normal(size=9)
        U = rng.normal(size=(6, 3))
        assert np.allclose(mpc.simulate(x0, U, 0.1, [0.3, 0.2, 0.1]),
                           euler_rollout(x0, U, 0.1, [0.3, 0.2, 0.1]), atol=1e-12)

    def test_drag_limits_speed(self):
        x = mpc.AgentState([0, 0, 0], [0, 0, 0], [LIM.a_x_max, 0, 0])
        for _ in range(2000):
            x = mpc.step_dynamics(x, [0, 0, 0], 0.01, LIM.drag)
        assert x.v[0] == pytest.approx(7.5, rel=1e-3)


class TestBuild:
    def _tasc(self, n_steps, n_polys):
        return Tasc([[_box([-5 - i, -5, -5], [5 + i, 5, 5]) for i in range(n_polys)]
                     for _ in range(n_steps)])

    def test_binary_count_full_horizon(self):
        prob = mpc.build_problem(np.zeros(9), _line_ref(), self._tasc(9, 3), LIM, W)
        assert prob.n_binaries == 27
        assert prob.n_vars == 27

    def test_binary_count_one_fewer_corridor(self):
        prob = mpc.build_problem(np.zeros(9), _line_ref(), self._tasc(8, 3), LIM, W)
        assert prob.n_binaries == 24

    def test_too_many_corridors(self):
        with pytest.raises(mpc.ConfigurationError):
            mpc.build_problem(np.zeros(9), _line_ref(), self._tasc(10, 1), LIM, W)

    def test_empty_polyhedron_presolve(self):
        bad = Polyhedron([[1, 0, 0], [-1, 0, 0]], [-1.0, -1.0])
        prob = mpc.build_problem(np.zeros(9), _line_ref(), Tasc([[bad]] * 9), LIM, W)
        assert prob.infeasible_reason is not None
        res = mpc.solve(prob)
        assert res.status == "infeasible" and not res.ok

    def test_start_outside_separating_plane(self):
        plane = Polyhedron([[-1, 0, 0]], [-1.0])
        prob = mpc.build_problem(np.zeros(9), _line_ref(), Tasc([[plane]] * 9), LIM, W)
        assert prob.infeasible_reason is not None


class TestSolve:
    def test_stationary_zero_cost(self):
        p = np.array([1.0, 2.0, 3.0])
        x0 = np.concatenate([p, np.zeros(6)])
        tasc = Tasc([[_box(p - 1, p + 1)]] * 9)
        res = mpc.solve(mpc.build_problem(x0, stationary_reference(p, 9), tasc, LIM, W))
        assert res.ok
        assert res.objective == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(res.U, 0.0, atol=1e-9)

    def test_single_poly_is_plain_qp(self):
        tasc = Tasc([[_box([-1, -1, -1], [0.6, 1, 1])]] * 9)
        prob = mpc.build_problem(np.zeros(9), _line_ref(), tasc, LIM, W)
        res = mpc.solve(prob)
        qp = solve_qp(prob.H, prob.g, prob.E, prob.e,
                      np.vstack([prob.C_hard] + [g[0].C for g in prob.groups]),
                      np.concatenate([prob.c_hard] + [g[0].d for g in prob.groups]))
        assert res.ok and res.nodes == 0
        assert res.objective == pytest.approx(qp.objective + prob.const, rel=1e-9)

    def test_solution_invariants(self):
        tasc = Tasc([[_box([-1, -1, -1], [1.2, 1, 1]), _box([0.8, -0.2, -0.2], [3, 0.2, 0.2])]] * 9)
        prob = mpc.build_problem(np.zeros(9), _line_ref(), tasc, LIM, W)
        res = mpc.solve(prob)
        tr = res.trajectory
        assert tr.dynamics_residual(LIM.drag) <= 1e-9
        assert np.all(np.abs(tr.states[-1, 3:]) <= 1e-9)
        assert np.all(np.abs(tr.inputs) <= LIM.j_max + 1e-9)
        assert np.all(tr.accelerations <= LIM.a_hi + 1e-9)
        assert np.all(tr.accelerations >= LIM.a_lo - 1e-9)
        for k, j in enumerate(res.assignment):
            P = tasc.corridors[k][prob.groups[k][j].poly]
            assert P.contains(tr.positions[k], 1e-7) and P.contains(tr.positions[k + 1], 1e-7)

    def test_enumeration_fixed_cases(self):
        for seed in range(12):
            x0, ref, cors, h = random_miqp_case(np.random.default_rng(seed))
            res = mpc.solve(mpc.build_problem(x0, ref, cors, LIM, W, M_big=50.0, h=h),
                            max_nodes=100000)
            best = enumerate_miqp(x0, ref, cors, LIM.j_max, LIM.a_lo, LIM.a_hi, LIM.drag, h,
                                  W.R_x, W.R_N, W.R_u)
            assert res.ok == np.isfinite(best)
            if res.ok:
                assert res.objective == pytest.approx(best, rel=1e-6, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_enumeration_property(seed):
    x0, ref, cors, h = random_miqp_case(np.random.default_rng(seed))
    res = mpc.solve(mpc.build_problem(x0, ref, cors, LIM, W, M_big=50.0, h=h), max_nodes=100000)
    best = enumerate_miqp(x0, ref, cors, LIM.j_max, LIM.a_lo, LIM.a_hi, LIM.drag, h,
                          W.R_x, W.R_N, W.R_u)
    assert res.ok == np.isfinite(best)
    if res.ok:
        assert res.objective == pytest.approx(best, rel=1e-6, abs=1e-6)


class TestIteration:
    def _prev(self):
        tasc = Tasc([[_box([-1, -1, -1], [3, 1, 1])]] * 9)
        res = mpc.solve(mpc.build_problem(np.zeros(9), _line_ref(), tasc, LIM, W))
        return res.trajectory, tasc

    def test_starts_at_second_state(self):
        prev, tasc = self._prev()
        ref = _line_ref()
        traj, res = mpc.plan_iteration(prev, ref, tasc, LIM, W)
        assert res.ok
        assert np.array_equal(traj.states[0], prev.states[1])
        assert traj.stamp == prev.stamp + 1

    def test_failure_falls_back_to_shift(self):
        prev, _ = self._prev()
        bad = Tasc([[Polyhedron([[1, 0, 0], [-1, 0, 0]], [-1.0, -1.0])]] * 9)
        traj, res = mpc.plan_iteration(prev, _line_ref(), bad, LIM, W)
        assert not res.ok
        assert np.array_equal(traj.states[:-1], prev.states[1:])

    def test_persistent_failure_converges_to_rest(self):
        tr, _ = self._prev()
        bad = Tasc([[Polyhedron([[1, 0, 0], [-1, 0, 0]], [-1.0, -1.0])]] * 9)
        for _ in range(tr.N):
            tr, _ = mpc.plan_iteration(tr, _line_ref(), bad, LIM, W)
        assert np.all(tr.states[:, 3:] == 0.0)
        assert np.allclose(tr.positions, tr.positions[0])

    def test_rest_trajectory(self):
        tr = mpc.rest_trajectory([1, 2, 3], 9, 0.1)
        assert tr.N == 9 and np.all(tr.positions == [1, 2, 3])
        assert tr.dynamics_residual([0.1, 0.1, 0.1]) == 0.0


def test_dump_problem(tmp_path):
    tasc = Tasc([[_box([-1, -1, -1], [1.2, 1, 1]), _box([-0.1, -0.2, -0.2], [3, 0.2, 0.2])]] * 3)
    prob = mpc.build_problem(np.zeros(9), _line_ref(N=3), tasc, LIM, W)
    res = mpc.solve(prob)
    mpc.dump_problem(prob, tmp_path / "p.txt", res)
    text = (tmp_path / "p.txt").read_text().splitlines()
    assert text[0].startswith("MIQP N=3 ") and "binaries=6" in text[0]
    assert sum(1 for t in text if t.startswith("BIN ")) == 6
    u_line = next(t for t in text if t.startswith("U "))
    assert np.allclose([float(v) for v in u_line.split()[1:]], res.U)
