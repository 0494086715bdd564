from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capot.feasibility import InfeasibleInstanceError
from capot.instance import TransportInstance, gen_random
from capot.oracle import _find_cycle, check_certificate, fractional_cells, mcf_solve

from util import forced_infeasible, loose_2x2, random_mixed_instance, saturated_2x2


def test_loose_2x2_against_parametric_search():
    # couplings of the 0.3-capped instance are [[a, 1/2-a], [1/2-a, a]]
    # with 0.2 <= a <= 0.3; scan that family in exact arithmetic
    family = [Fraction(k, 1000) for k in range(200, 301)]
    best_a = min(family, key=lambda a: 2 * (Fraction(1, 2) - a))
    best = 2 * (Fraction(1, 2) - best_a)
    sol = mcf_solve(loose_2x2())
    assert sol.value_exact == best == Fraction(2, 5)
    assert sol.value == 0.4
    np.testing.assert_allclose(sol.h_star.h, [[0.3, 0.2], [0.2, 0.3]], atol=0, rtol=0)
    assert sol.fractional_cells == 2


def test_saturated_unique_plan():
    sol = mcf_solve(saturated_2x2())
    assert sol.value == 0.5
    np.testing.assert_array_equal(sol.h_star.h, np.full((2, 2), 0.25))
    assert sol.fractional_cells == 0
    assert check_certificate(saturated_2x2(), sol).ok


def test_zero_cost():
    inst = TransportInstance.from_units([3, 1], [2, 2], [[2, 2], [1, 1]], np.zeros((2, 2)), 4)
    sol = mcf_solve(inst)
    assert sol.value == 0.0
    assert sol.h_star.is_coupling(inst)


def test_infeasible_raises_with_certificate():
    with pytest.raises(InfeasibleInstanceError) as exc:
        mcf_solve(forced_infeasible())
    assert exc.value.verdict.violating_pair.A == (0,)


def test_negative_costs():
    inst = TransportInstance.from_units([1, 1], [1, 1], [[2, 2], [2, 2]], [[-1.0, 0.0], [0.0, -1.0]], 2)
    sol = mcf_solve(inst)
    assert sol.value == -1.0
    np.testing.assert_array_equal(sol.h_units, [[1, 0], [0, 1]])


def test_certificate_detects_suboptimal_plan():
    inst = loose_2x2()
    sol = mcf_solve(inst)
    worse = sol.h_units.copy()
    worse += np.array([[-1, 1], [1, -1]])
    bad = replace(sol, h_units=worse)
    assert not check_certificate(inst, bad).ok


def test_find_cycle():
    assert _find_cycle([(0, 0), (0, 1), (1, 1)], 2) is None
    cyc = _find_cycle([(0, 0), (0, 1), (1, 1), (1, 0)], 2)
    assert sorted(cyc) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    # consecutive cells alternate between sharing a row and sharing a column
    for a, b in zip(cyc, cyc[1:] + cyc[:1]):
        assert (a[0] == b[0]) != (a[1] == b[1])


def test_brute_force_small():
    # every plan on a 2x3 grid with denominator 6 enumerated directly
    rng = np.random.default_rng(5)
    for _ in range(20):
        inst = random_mixed_instance(rng, 2, 3, denom=6)
        try:
            sol = mcf_solve(inst)
        except InfeasibleInstanceError:
            continue
        best = None
        f, g, hb = inst.f_units, inst.g_units, inst.hbar_units
        for a in range(hb[0, 0] + 1):
            for b in range(hb[0, 1] + 1):
                c = f[0] - a - b
                if not 0 <= c <= hb[0, 2]:
                    continue
                row2 = np.array([g[0] - a, g[1] - b, g[2] - c])
                if np.any(row2 < 0) or np.any(row2 > hb[1]):
                    continue
                h = np.array([[a, b, c], row2])
                val = sum(Fraction(float(inst.cost[i, j])) * int(h[i, j]) for i in range(2) for j in range(3)) / 6
                best = val if best is None else min(best, val)
        assert sol.value_exact == best


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 7), n=st.integers(1, 7))
def test_certified_and_basic(seed, m, n):
    inst = gen_random(seed, m, n, 0.5)
    sol = mcf_solve(inst)
    assert check_certificate(inst, sol).ok
    assert sol.fractional_cells <= m + n - 1
    assert fractional_cells(sol.h_units, inst.hbar_units) == sol.fractional_cells
    assert abs(sol.value - float(np.sum(inst.cost * sol.h_star.h))) <= 1e-12
