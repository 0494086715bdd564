import numpy as np
import pytest

from capot.continuation import SWEEP_COLUMNS, SweepError, SweepSchedule, sweep
from capot.feasibility import InfeasibleInstanceError
from capot.instance import TransportInstance, gen_random
from capot.oracle import mcf_solve
from capot.penalty import solve_penalized

from util import forced_infeasible, saturated_2x2


def test_saturated_rows_match_closed_form():
    rep = sweep(saturated_2x2(), SweepSchedule(eps0=0.1, ratio=0.5, steps=5, tol_kkt=1e-12), oracle=True)
    assert [r.eps for r in rep.rows] == [0.1, 0.05, 0.025, 0.0125, 0.00625]
    for r in rep.rows:
        assert r.relaxed_value == pytest.approx(0.5 - r.eps / 2, abs=1e-10)
        assert r.linear_value == pytest.approx(0.5 - r.eps, abs=1e-10)
        assert r.dual_J == pytest.approx(0.5, abs=1e-9)
        assert r.eps_u_norm_sq == pytest.approx(r.eps / 2, abs=1e-10)
        assert r.eps_v_norm_sq == pytest.approx(r.eps / 2, abs=1e-10)
        assert r.oracle_gap == pytest.approx(r.eps, abs=1e-9)
    assert rep.oracle_value == 0.5
    assert rep.final_dual_estimate == pytest.approx(0.5, abs=1e-9)


def test_large_eps_clips_at_zero():
    # for eps >= 1/2 the off-diagonal cells hit zero: each row is 1/4 short,
    # so u = v = (-1/4, -1/4) and eps |u|^2 = eps / 8
    rep = sweep(saturated_2x2(), SweepSchedule(eps0=1.0, ratio=0.5, steps=1, tol_kkt=1e-12))
    r = rep.rows[0]
    assert r.linear_value == pytest.approx(0.0, abs=1e-12)
    assert r.eps_u_norm_sq == pytest.approx(0.125, abs=1e-10)
    assert r.dual_J == pytest.approx(0.25, abs=1e-10)


def test_zero_cost_rows():
    inst = TransportInstance.from_units([3, 1], [2, 2], [[2, 2], [1, 1]], np.zeros((2, 2)), 4)
    rep = sweep(inst, SweepSchedule(steps=8), oracle=True)
    assert rep.oracle_value == 0.0
    assert abs(rep.rows[-1].linear_value) <= 1e-12
    assert abs(rep.rows[-1].dual_J) <= 1e-6


def test_infeasible_rejected_before_solving():
    with pytest.raises(InfeasibleInstanceError):
        sweep(forced_infeasible())


def test_partial_report_on_iteration_limit():
    inst = gen_random(3, 6, 6, 0.5)
    with pytest.raises(SweepError) as exc:
        sweep(inst, SweepSchedule(eps0=1.0, ratio=0.1, steps=4, max_iter=50))
    assert len(exc.value.partial.rows) < 4


@pytest.mark.parametrize("bad", [dict(eps0=0.0), dict(ratio=1.0), dict(ratio=0.0), dict(steps=0), dict(tol_kkt=-1.0), dict(max_iter=0), dict(eps0=1e-300, ratio=1e-10, steps=40)])
def test_schedule_validation(bad):
    with pytest.raises(ValueError):
        SweepSchedule(**bad)


def test_default_schedule():
    eps = SweepSchedule().epsilons()
    assert len(eps) == 18 and eps[0] == 1.0
    assert eps[-1] == pytest.approx(7.62939453125e-06, rel=0, abs=0)


@pytest.fixture(scope="module")
def random_sweeps():
    out = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        inst = gen_random(100 + seed, int(rng.integers(2, 8)), int(rng.integers(2, 8)), 0.5)
        exact = mcf_solve(inst)
        out.append((inst, exact, sweep(inst, oracle=exact)))
    return out


def test_sandwich_and_relaxed_below_optimum(random_sweeps):
    for inst, exact, rep in random_sweeps:
        opt = exact.value
        for r in rep.rows:
            assert r.dual_J <= opt + 1e-9
            assert r.relaxed_value <= opt + 1e-9
            assert opt <= max(r.linear_value, r.dual_J) + r.oracle_gap + 1e-12
        # the bracket closes
        last = rep.rows[-1]
        assert abs(last.dual_J - last.linear_value) <= 1e-4


def test_marginal_defect_bound(random_sweeps):
    # costs are nonnegative here
    for inst, exact, rep in random_sweeps:
        for r in rep.rows:
            assert r.marginal_residual_sq <= 2 * r.eps * exact.value + 1e-9


def test_penalty_terms_vanish(random_sweeps):
    for _, _, rep in random_sweeps:
        eu = np.array([r.eps_u_norm_sq for r in rep.rows])
        ev = np.array([r.eps_v_norm_sq for r in rep.rows])
        assert eu[-1] < 1e-3 and ev[-1] < 1e-3
        # once the active pattern settles these halve with eps
        assert np.all(np.diff(eu[-8:]) < 0) and np.all(np.diff(ev[-8:]) < 0)


def test_row_identity(random_sweeps):
    for _, _, rep in random_sweeps:
        for r, cert in zip(rep.rows, rep.certificates):
            lhs = r.dual_J - r.linear_value - r.eps_u_norm_sq - r.eps_v_norm_sq
            assert abs(lhs) <= 2 * cert.duality_identity_residual + 1e-12


def test_report_shape(random_sweeps):
    _, exact, rep = random_sweeps[0]
    assert SWEEP_COLUMNS == (
        "eps", "relaxed_value", "linear_value", "dual_J", "dual_J_eps", "eps_u_norm_sq",
        "eps_v_norm_sq", "marginal_residual_sq", "oracle_gap", "iterations",
    )
    assert all(len(row) == len(SWEEP_COLUMNS) for row in rep.table())
    s = rep.summary()
    assert s["rows"] == 18 and s["oracle_value"] == exact.value
    assert s["final_primal_estimate"] == rep.rows[-1].linear_value


def test_warm_start_saves_iterations():
    inst = gen_random(8, 6, 6, 0.5)
    sched = SweepSchedule(steps=10)
    warm = sweep(inst, sched)
    cold = sum(solve_penalized(inst, e, momentum=True).iterations for e in sched.epsilons())
    assert sum(r.iterations for r in warm.rows) < cold
