import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capot.continuation import SweepSchedule
from capot.lp_toy import (
    LPInstance,
    LPIterationLimitError,
    gen_random_lp,
    lp_sweep,
    lp_vertex_oracle,
    relaxed_dual_value,
    relaxed_value,
    solve_penalized_lp,
)

ONE = LPInstance([[1.0]], [1.0], [1.0])


def test_scalar_closed_form():
    # I(y) = y + (y - 1)^2 / (2 eps), minimized at y = 1 - eps
    sol = solve_penalized_lp(ONE, 0.1)
    assert sol.y_eps[0] == pytest.approx(0.9, abs=1e-10)
    assert sol.x_eps[0] == pytest.approx(1.0, abs=1e-9)
    assert sol.I_eps == pytest.approx(0.95, abs=1e-12)
    assert sol.J_eps == pytest.approx(0.95, abs=1e-9)
    assert sol.constraint_violation <= 1e-9
    assert not sol.diverged and not sol.cap_active


def test_zero_objective():
    lp = LPInstance([[1.0, 2.0], [-1.0, 0.5]], [1.0, 2.0], [0.0, 0.0])
    sol = solve_penalized_lp(lp, 0.1)
    np.testing.assert_array_equal(sol.y_eps, [0.0, 0.0])
    np.testing.assert_array_equal(sol.x_eps, [0.0, 0.0])
    assert sol.I_eps == 0.0 and sol.J_eps == 0.0


def test_unbounded_below_is_flagged():
    sol = solve_penalized_lp(LPInstance([[0.0]], [-1.0], [0.0]), 0.1)
    assert sol.diverged


def test_cap_restores_attainment():
    lp = LPInstance([[0.0]], [-1.0], [0.0], ycap=[5.0])
    sol = solve_penalized_lp(lp, 0.1)
    assert not sol.diverged and sol.cap_active
    assert sol.y_eps[0] == 5.0


def test_affine_relation_exact():
    lp = gen_random_lp(4, 6, 3)
    sol = solve_penalized_lp(lp, 0.01)
    np.testing.assert_array_equal(sol.x_eps, (lp.c - lp.A.T @ sol.y_eps) / 0.01)
    assert np.all(sol.y_eps >= 0)


def test_iteration_limit():
    lp = gen_random_lp(5, 8, 4)
    with pytest.raises(LPIterationLimitError) as exc:
        solve_penalized_lp(lp, 1e-4, max_iter=3, face_solve=False)
    assert exc.value.best.kkt_residual > 1e-10


def test_face_solve_matches_plain_descent():
    lp = gen_random_lp(6, 5, 2)
    a = solve_penalized_lp(lp, 0.05, momentum=False, face_solve=False, max_iter=2_000_000)
    b = solve_penalized_lp(lp, 0.05, momentum=True)
    np.testing.assert_allclose(a.y_eps, b.y_eps, atol=1e-8)
    assert a.J_eps == pytest.approx(b.J_eps, abs=1e-9)


@pytest.mark.parametrize("bad", [
    dict(A=[[1.0, 2.0]], b=[1.0, 2.0], c=[1.0, 1.0]),
    dict(A=[[1.0]], b=[1.0], c=[1.0, 2.0]),
    dict(A=[[np.nan]], b=[1.0], c=[1.0]),
    dict(A=[[1.0]], b=[1.0], c=[1.0], ycap=[0.0]),
])
def test_instance_validation(bad):
    with pytest.raises(ValueError):
        LPInstance(**bad)


# -- oracle -------------------------------------------------------------------


def test_oracle_single_constraint():
    res = lp_vertex_oracle(ONE)
    assert res.status == "optimal" and res.value == 1.0
    np.testing.assert_array_equal(res.argmax, [1.0])


def test_oracle_box():
    A = np.vstack([np.eye(2), -np.eye(2)])
    res = lp_vertex_oracle(LPInstance(A, [1.0, 1.0, 0.0, 0.0], [1.0, 1.0]))
    assert res.status == "optimal" and res.value == 2.0
    np.testing.assert_array_equal(res.argmax, [1.0, 1.0])


def test_oracle_unbounded():
    res = lp_vertex_oracle(LPInstance([[1.0, 0.0]], [0.0], [0.0, 1.0]))
    assert res.status == "unbounded" and res.value == np.inf
    # the reported ray improves the objective and stays feasible
    assert res.argmax[1] > 0 and res.argmax[0] <= 0


def test_oracle_infeasible():
    res = lp_vertex_oracle(LPInstance([[1.0], [-1.0]], [-1.0, -1.0], [1.0]))
    assert res.status == "infeasible" and res.value == -np.inf


def test_oracle_size_bound():
    with pytest.raises(ValueError):
        lp_vertex_oracle(LPInstance(np.ones((9, 9)), np.ones(9), np.ones(9)))


@pytest.mark.parametrize("seed", range(10))
def test_oracle_finds_planted_optimum(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    lp = gen_random_lp(seed, int(rng.integers(n, 9)), n)
    res = lp_vertex_oracle(lp)
    assert res.status == "optimal"
    # any feasible point does no better; sample some
    for _ in range(200):
        x = res.argmax + rng.normal(scale=0.5, size=n)
        if np.all(lp.A @ x <= lp.b):
            assert lp.c @ x <= res.value + 1e-9


# -- sweep ----------------------------------------------------------------------


def test_sweep_scalar_gap_is_half_eps():
    rows, res = lp_sweep(ONE, SweepSchedule(eps0=0.5, ratio=0.1, steps=5, tol_kkt=1e-12))
    assert res.value == 1.0
    for r in rows:
        assert r.gap_vs_oracle == pytest.approx(r.eps / 2, abs=1e-10)


def test_sweep_zero_objective():
    lp = LPInstance([[1.0, 2.0], [-1.0, 0.5], [0.0, -1.0]], [1.0, 2.0, 3.0], [0.0, 0.0])
    rows, _ = lp_sweep(lp, SweepSchedule(steps=5))
    assert all(r.gap_vs_oracle == 0.0 for r in rows)


def test_sweep_flags_binding_cap():
    lp = LPInstance([[1.0]], [1.0], [1.0], ycap=[0.5])
    rows, _ = lp_sweep(lp, SweepSchedule(eps0=0.1, ratio=0.5, steps=3))
    assert all(r.cap_active for r in rows)
    # x = (1 - 0.5) / eps exceeds b = 1, which is allowed on capped rows
    assert all(r.constraint_violation > 0 for r in rows)


def test_sweep_diverged_rows_are_flagged():
    rows, res = lp_sweep(LPInstance([[0.0]], [-1.0], [0.0]), SweepSchedule(steps=2))
    assert res.status == "infeasible"
    assert all(r.diverged and r.gap_vs_oracle is None for r in rows)


# -- properties -----------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eps=st.floats(1e-4, 10.0))
def test_relaxed_weak_duality_fuzz(seed, eps):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    lp = gen_random_lp(seed, int(rng.integers(n, 9)), n)
    y = rng.exponential(size=lp.m) * (rng.random(lp.m) < 0.7)
    # a feasible x: pull the planted optimum toward a random point of the polytope
    x = lp_vertex_oracle(lp).argmax
    d = rng.normal(size=n)
    slack_step = np.where(lp.A @ d > 0, (lp.b - lp.A @ x) / np.where(lp.A @ d > 0, lp.A @ d, 1.0), np.inf)
    x = x + rng.random() * min(1.0, float(slack_step.min())) * d
    assert np.all(lp.A @ x <= lp.b + 1e-12)
    assert relaxed_value(lp, y, eps) >= relaxed_dual_value(lp, x, eps) - 1e-10


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eps=st.floats(1e-3, 1.0))
def test_gap_equals_complementarity(seed, eps):
    # with x read off from y: I(y) - J(x) = (b - A x) . y for every y
    rng = np.random.default_rng(seed)
    lp = gen_random_lp(seed, 5, 3)
    y = rng.exponential(size=lp.m)
    x = (lp.c - lp.A.T @ y) / eps
    lhs = relaxed_value(lp, y, eps) - relaxed_dual_value(lp, x, eps)
    assert lhs == pytest.approx(float((lp.b - lp.A @ x) @ y), rel=1e-8, abs=1e-8)
