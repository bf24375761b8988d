import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeroswarm.qp import solve_qp
from oracles import qp_cvxopt


def test_unconstrained():
    G = np.diag([2.0, 4.0])
    r = solve_qp(G, [-2.0, -4.0])
    assert r.ok
    assert r.x == pytest.approx([1.0, 1.0])
    assert r.objective == pytest.approx(-3.0)


def test_active_bound_and_multiplier():
    # min 0.5|x|^2 - x0  s.t. x0 <= 0.5
    r = solve_qp(np.eye(2), [-1.0, 0.0], C=[[1.0, 0.0]], c=[0.5])
    assert r.x == pytest.approx([0.5, 0.0])
    assert r.ineq_multipliers == pytest.approx([0.5])


def test_equality():
    r = solve_qp(np.eye(2), [0.0, 0.0], E=[[1.0, 1.0]], e=[2.0])
    assert r.x == pytest.approx([1.0, 1.0])
    # stationarity with G x + g + E' nu = 0
    assert r.x + r.eq_multipliers[0] * np.ones(2) == pytest.approx([0, 0], abs=1e-12)


def test_infeasible():
    r = solve_qp(np.eye(1), [0.0], C=[[1.0], [-1.0]], c=[-1.0, -1.0])
    assert r.status == "infeasible"
    assert not r.ok


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 8), st.integers(0, 12), st.integers(0, 3))
def test_random_against_cvxopt(seed, n, m, p):
    rng = np.random.default_rng(seed)
    p = min(p, n - 1) if n > 1 else 0
    M = rng.normal(size=(n, n))
    G = M @ M.T + 0.1 * np.eye(n)
    g = rng.normal(size=n)
    x_feas = rng.normal(size=n)
    C = rng.normal(size=(m, n))
    c = C @ x_feas + rng.uniform(0, 1, m)
    E = rng.normal(size=(p, n))
    e = E @ x_feas
    ours = solve_qp(G, g, E, e, C, c)
    ref = qp_cvxopt(G, g, C if m else None, c, E if p else None, e)
    assert ours.ok and ref is not None
    assert ours.objective == pytest.approx(ref[1], rel=1e-6, abs=1e-7)
    assert np.max(C @ ours.x - c, initial=0) <= 1e-8
    assert np.allclose(E @ ours.x, e, atol=1e-8)
    # KKT: stationarity and sign of multipliers
    grad = G @ ours.x + g + E.T @ ours.eq_multipliers + C.T @ ours.ineq_multipliers
    assert np.allclose(grad, 0, atol=1e-7)
    assert np.all(ours.ineq_multipliers >= -1e-10)
