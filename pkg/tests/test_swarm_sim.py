import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from aeroswarm import scenarios as sc
from aeroswarm import swarm_sim as ss
from aeroswarm.errors import ConfigurationError

RES = math.radians(2.0)


def _world(cyl=(), box=()):
    return ss.World(list(cyl), list(box), [-20, -20, -20], [20, 20, 20])


class TestWorld:
    def test_distance(self):
        w = _world([ss.Cylinder([5, 0], 0.5, -10, 10)], [ss.Box([-3, -1, -1], [-2, 1, 1])])
        d = w.distance([[0, 0, 0], [4.5, 0, 0], [-1, 0, 0]])
        assert d == pytest.approx([2.0, 0.0, 1.0])

    def test_cylinder_out_of_bounds(self):
        with pytest.raises(ConfigurationError):
            _world([ss.Cylinder([19.9, 0], 0.5, -1, 1)])

    def test_rasterize_marks_touching_voxels(self):
        w = _world(box=[ss.Box([0.0, 0.0, 0.0], [0.5, 0.5, 0.5])])
        cells = w.rasterize([0, 0, 0], [3, 3, 3], 0.5)
        assert cells[0, 0, 0] == 1 and cells[1, 1, 1] == 1
        assert cells[2, 2, 2] == 0


class TestScan:
    def test_empty_world(self):
        assert len(ss.simulate_depth_scan(_world(), [0, 0, 0], 10.0, RES).points) == 0

    def test_cylinder_ahead(self):
        w = _world([ss.Cylinder([5, 0], 0.5, -10, 10)])
        pts = ss.simulate_depth_scan(w, [0, 0, 0], 10.0, RES).points
        assert len(pts) > 0
        assert float(np.min(np.linalg.norm(pts, axis=1))) == pytest.approx(4.5, abs=1e-9)
        assert np.all(np.abs(np.hypot(pts[:, 0] - 5, pts[:, 1]) - 0.5) < 1e-9)

    def test_out_of_range(self):
        w = _world([ss.Cylinder([5, 0], 0.5, -10, 10)])
        assert len(ss.simulate_depth_scan(w, [0, 0, 0], 4.4, RES).points) == 0

    def test_enclosure_every_ray_hits(self):
        walls = [ss.Box([-3, -3, -3], [-2, 3, 3]), ss.Box([2, -3, -3], [3, 3, 3]),
                 ss.Box([-3, -3, -3], [3, -2, 3]), ss.Box([-3, 2, -3], [3, 3, 3]),
                 ss.Box([-3, -3, -3], [3, 3, -2]), ss.Box([-3, -3, 2], [3, 3, 3])]
        pts = ss.simulate_depth_scan(_world(box=walls), [0.3, -0.2, 0.1], 10.0, RES).points
        assert len(pts) == len(ss._ray_directions(RES))
        assert np.allclose(np.max(np.abs(pts), axis=1), 2.0, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
@example(630094)
def test_scan_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    cyl = [ss.Cylinder(rng.uniform(-8, 8, 2), rng.uniform(0.1, 1), -5, rng.uniform(-1, 5))
           for _ in range(5)]
    box = []
    for _ in range(3):
        lo = rng.uniform(-8, 7, 3)
        box.append(ss.Box(lo, lo + rng.uniform(0.2, 2, 3)))
    w = _world(cyl, box)
    o = np.array([0.0, 0.0, 0.5])
    if w.distance([o])[0] <= 0:
        return
    got = ss.simulate_depth_scan(w, o, 10.0, math.radians(6)).points
    # brute force: march every ray with the signed distance field
    dirs = ss._ray_directions(math.radians(6))
    hits = []
    for d in dirs:
        t = 0.0
        while t <= 10.0:
            dist = w.distance([o + t * d])[0]
            if dist < 1e-9:
                hits.append(o + t * d)
                break
            t += max(dist, 1e-9)
    assert len(got) == len(hits)
    if hits:
        # grazing rays stop up to sqrt(2 R delta) short of the tangent point
        assert np.allclose(np.sort(np.linalg.norm(got - o, axis=1)),
                           np.sort(np.linalg.norm(np.array(hits) - o, axis=1)), atol=1e-4)


class TestCollisions:
    r, zo = 0.125, 0.125

    def _agents(self, p, q):
        a = np.array([p, q], float)
        return ss.check_collisions(a, a, _world(), self.r, self.zo)

    def test_horizontal_touching_is_safe(self):
        assert self._agents([0, 0, 0], [0.25, 0, 0]) == []

    def test_horizontal_overlap(self):
        ev = self._agents([0, 0, 0], [0.249, 0, 0])
        assert [e.kind for e in ev] == ["collision_agent"]

    def test_vertical_uses_ellipsoid(self):
        assert self._agents([0, 0, 0], [0, 0, 0.5]) == []
        assert len(self._agents([0, 0, 0], [0, 0, 0.499])) == 1

    def test_obstacle_clearance(self):
        w = _world([ss.Cylinder([1, 0], 0.5, -5, 5)])
        p = np.array([[0.5 - self.r, 0, 0]])
        assert ss.check_collisions(p, p, w, self.r, self.zo) == []
        p2 = p + [0.001, 0, 0]
        assert len(ss.check_collisions(p2, p2, w, self.r, self.zo)) == 1

    def test_crossing_between_samples(self):
        # endpoints are clear but the agents swap places mid-step
        a = np.array([[0, 0, 0], [1, 0, 0]], float)
        b = np.array([[1, 0, 0], [0, 0, 0]], float)
        assert len(ss.check_collisions(a, b, _world(), self.r, self.zo)) == 1


class TestDeadlock:
    def test_short_history(self):
        h = [np.zeros((2, 3))] * 5
        assert ss.detect_deadlock(h, [False, False], 10) == []

    def test_stuck_agent(self):
        h = [np.array([[0, 0, 0], [k * 0.1, 0, 0]], float) for k in range(12)]
        assert ss.detect_deadlock(h, [False, False], 10) == [0]

    def test_arrived_agent_ignored(self):
        h = [np.zeros((1, 3))] * 12
        assert ss.detect_deadlock(h, [True], 10) == []

    def test_slow_drift_below_eps(self):
        h = [np.array([[k * 0.004, 0, 0]]) for k in range(12)]
        assert ss.detect_deadlock(h, [False], 10) == [0]


class TestMetrics:
    def test_unit_jerk_cost_and_distance(self):
        h = 0.1
        rows = []
        for k in range(201):
            jerk = [1.0, 0, 0] if 1 <= k <= 10 else [0, 0, 0]
            rows.append([k * h, 0, 0.1 * k, 0, 0, 1, 0, 0, 0, 0, 0, *jerk])
        m = ss.accumulate_metrics(rows, 1, h, [20.0], [0.0])[0]
        assert m.jerk_cost == pytest.approx(1.0)
        assert m.flight_distance == pytest.approx(20.0)
        assert m.flight_time == pytest.approx(20.0)
        assert m.mean_velocity == pytest.approx(1.0)
        assert m.acc_cost == 0.0

    def test_not_arrived(self):
        rows = [[0.0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]]
        m = ss.accumulate_metrics(rows, 1, 0.1, [None], [None])[0]
        assert not m.arrived and math.isnan(m.flight_time)


class TestComm:
    @pytest.mark.parametrize("kw", [dict(loss_prob=1.5), dict(latency=("fixed", -1.0)),
                                    dict(latency=("uniform", 0.2, 0.1)),
                                    dict(schedule="sometimes"), dict(latency=("gauss", 0.1))])
    def test_validation(self, kw):
        with pytest.raises(ConfigurationError):
            ss.CommModel(**kw)

    def test_alternating_only_odd_iterations(self):
        c = ss.CommModel(loss_prob=1.0, schedule="alternating")
        assert [c.lost(0, 1, l) for l in range(4)] == [False, True, False, True]

    def test_bursts_last_burst_len(self):
        c = ss.CommModel(loss_prob=0.0, schedule="bursty", burst_len=3)
        c.loss_prob = 1.0
        assert c.lost(0, 1, 0)
        c.loss_prob = 0.0
        assert [c.lost(0, 1, l) for l in range(1, 5)] == [True, True, False, False]

    def test_seeded_sequence(self):
        a = ss.CommModel(loss_prob=0.5, seed=3)
        b = ss.CommModel(loss_prob=0.5, seed=3)
        assert [a.lost(0, 1, l) for l in range(50)] == [b.lost(0, 1, l) for l in range(50)]


def _duo(**comm):
    cfg = sc.load_config("duo_headon")
    if comm:
        cfg = replace(cfg, comm=replace(cfg.comm, **comm))
    return cfg


class TestSimulation:
    def test_head_on_separation(self):
        res = sc.build_simulation(_duo()).run()
        assert res.metrics.success
        assert not res.metrics.collision_flag
        assert res.min_separation >= 2 * 0.125
        assert res.invariant_violations == []

    def test_total_loss_freezes_plans(self):
        sim = sc.build_simulation(replace(_duo(loss_prob=1.0), max_sim_time=3.0))
        res = sim.run()
        assert all(a.last_plan_iter == 0 for a in sim.agents)
        assert not res.metrics.collision_flag
        # the one plan made at iteration 0 was a rest plan; nothing moves
        rows = np.array(res.traj_rows)
        assert np.allclose(rows[:, 5:8], 0.0)

    def test_latency_beyond_period_acts_as_loss(self):
        sim = sc.build_simulation(replace(_duo(latency=("fixed", 0.15)), max_sim_time=2.0))
        res = sim.run()
        kinds = {e.kind for e in res.events}
        assert "skip_plan" in kinds
        assert all(a.last_plan_iter == 0 for a in sim.agents)

    def test_short_latency_is_harmless(self):
        res = sc.build_simulation(_duo(latency=("fixed", 0.05))).run()
        assert res.metrics.success

    def test_deterministic(self):
        r1 = sc.build_simulation(_duo()).run()
        r2 = sc.build_simulation(_duo()).run()
        assert r1.traj_rows == r2.traj_rows
        assert r1.event_lines() == r2.event_lines()

    def test_mismatched_spawns(self):
        with pytest.raises(ConfigurationError):
            ss.Simulation(_world(), [[0, 0, 0]], [[1, 0, 0], [2, 0, 0]], ss.PlannerParams(),
                          ss.CommModel())


class TestParams:
    def test_period_must_equal_step(self):
        with pytest.raises(ConfigurationError):
            ss.PlannerParams(T_traj=0.2)

    def test_map_period_multiple(self):
        with pytest.raises(ConfigurationError):
            ss.PlannerParams(T_map=0.25)

    def test_derived(self):
        p = ss.PlannerParams()
        assert p.map_every == 2
        assert p.comm_range == pytest.approx((p.dims[0] - 1) * p.voxel_size)
        assert p.limits.drag == pytest.approx(np.full(3, 20.0 / 9.0))


def test_traj_csv(tmp_path):
    ss.write_traj_csv([[0.1, 1, *range(12)]], tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == ss.TRAJ_HEADER
    assert lines[1].startswith("0.100,1,0.000000,1.000000")
