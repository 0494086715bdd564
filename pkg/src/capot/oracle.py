"""Exact optimum of the capacity-constrained transport LP by min-cost flow.

Masses are integers in units of ``1/denom`` and costs are converted to exact
rationals (every float is one), so the flow, its cost and the optimality
certificate involve no rounding at all. Only the reported ``value`` is
rounded once, to the nearest float.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .feasibility import InfeasibleInstanceError, maxflow_feasible
from .instance import CouplingMatrix, TransportInstance
from .network import bipartite_network

__all__ = ["ExactSolution", "OptimalityCertificate", "mcf_solve", "check_certificate", "fractional_cells"]


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Optimal plan, its cost and the dual node potentials.

    ``potentials`` follow the network layout: index 0 is the super source,
    ``1..m`` the sources, ``m+1..m+n`` the sinks, ``m+n+1`` the super sink.
    """

    h_star: CouplingMatrix
    h_units: np.ndarray
    value: float
    value_exact: Fraction
    fractional_cells: int
    potentials: tuple[Fraction, ...]

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "h_star": self.h_star.h.tolist(),
            "fractional_cells": self.fractional_cells,
            "potentials": [float(p) for p in self.potentials],
        }


@dataclass(frozen=True)
class OptimalityCertificate:
    ok: bool
    min_reduced_cost: Fraction
    max_abs_two_sided: Fraction
    marginals_exact: bool
    within_capacity: bool


def fractional_cells(h_units: np.ndarray, hbar_units: np.ndarray) -> int:
    return int(np.count_nonzero((h_units > 0) & (h_units < hbar_units)))


def _find_cycle(cells: list[tuple[int, int]], m: int) -> list[tuple[int, int]] | None:
    """A cycle in the bipartite graph whose edges are ``cells``, as consecutive cells.

    Rows are nodes ``i`` and columns nodes ``m + j``.
    """
    parent: dict[int, int] = {}

    def root(x: int) -> int:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    forest: dict[int, list[tuple[int, tuple[int, int]]]] = {}
    for i, j in cells:
        a, b = i, m + j
        ra, rb = root(a), root(b)
        if ra != rb:
            parent[ra] = rb
            forest.setdefault(a, []).append((b, (i, j)))
            forest.setdefault(b, []).append((a, (i, j)))
            continue
        # a and b already connected: the tree path a -> b plus this cell is a cycle
        prev: dict[int, tuple[int, tuple[int, int]] | None] = {a: None}
        queue = deque([a])
        while b not in prev:
            x = queue.popleft()
            for y, cell in forest.get(x, ()):
                if y not in prev:
                    prev[y] = (x, cell)
                    queue.append(y)
        path = []
        x = b
        while prev[x] is not None:
            x, cell = prev[x]
            path.append(cell)
        return [(i, j)] + path[::-1]
    return None


def _to_vertex(h: np.ndarray, hbar: np.ndarray, m: int) -> np.ndarray:
    """Push mass around cycles of fractional cells until none remain.

    Along a cycle of cells with zero reduced cost the objective is constant,
    so optimality is preserved while the support of fractional cells becomes
    a forest (a basic solution).
    """
    h = h.copy()
    while True:
        cells = [tuple(map(int, c)) for c in np.argwhere((h > 0) & (h < hbar))]
        cycle = _find_cycle(cells, m)
        if cycle is None:
            return h
        plus, minus = cycle[0::2], cycle[1::2]
        delta = min(min(int(hbar[c] - h[c]) for c in plus), min(int(h[c]) for c in minus))
        for c in plus:
            h[c] += delta
        for c in minus:
            h[c] -= delta


def mcf_solve(inst: TransportInstance) -> ExactSolution:
    """Minimum-cost plan via successive shortest paths.

    Raises:
        InfeasibleInstanceError: with the min-cut certificate when no plan exists.
    """
    verdict = maxflow_feasible(inst)
    if not verdict.feasible:
        raise InfeasibleInstanceError(verdict)
    m, n = inst.shape
    net, middle = bipartite_network(inst, with_costs=True)
    sent, pot = net.min_cost_flow(0, m + n + 1, inst.denom)
    if sent != inst.denom:
        raise AssertionError("min-cost flow could not route all mass on a feasible instance")
    h_units = np.array([[net.flow_on(middle[i][j]) for j in range(n)] for i in range(m)], dtype=np.int64)
    h_units = _to_vertex(h_units, inst.hbar_units, m)
    exact = sum(
        (Fraction(float(inst.cost[i, j])) * int(h_units[i, j]) for i in range(m) for j in range(n) if h_units[i, j]),
        Fraction(0),
    ) / inst.denom
    return ExactSolution(
        h_star=CouplingMatrix(h_units / inst.denom),
        h_units=h_units,
        value=float(exact),
        value_exact=exact,
        fractional_cells=fractional_cells(h_units, inst.hbar_units),
        potentials=tuple(pot),
    )


def check_certificate(inst: TransportInstance, sol: ExactSolution) -> OptimalityCertificate:
    """Recheck optimality of ``sol`` from scratch in exact arithmetic.

    Every arc with spare capacity must have reduced cost ``>= 0``, every arc
    carrying flow ``<= 0``; so arcs with slack both ways have reduced cost 0.
    """
    m, n = inst.shape
    pot = sol.potentials
    h = sol.h_units
    arcs = []
    for i in range(m):
        arcs.append((0, 1 + i, Fraction(0), int(inst.f_units[i]), int(h[i].sum())))
    for i in range(m):
        for j in range(n):
            arcs.append((1 + i, 1 + m + j, Fraction(float(inst.cost[i, j])), int(inst.hbar_units[i, j]), int(h[i, j])))
    for j in range(n):
        arcs.append((1 + m + j, m + n + 1, Fraction(0), int(inst.g_units[j]), int(h[:, j].sum())))

    ok = True
    min_rc = None
    max_two = Fraction(0)
    for u, v, c, cap, x in arcs:
        rc = c + pot[u] - pot[v]
        if x < cap:
            ok &= rc >= 0
            min_rc = rc if min_rc is None else min(min_rc, rc)
        if x > 0:
            ok &= rc <= 0
        if 0 < x < cap:
            max_two = max(max_two, abs(rc))
    marg = bool(np.array_equal(h.sum(axis=1), inst.f_units) and np.array_equal(h.sum(axis=0), inst.g_units))
    within = bool(np.all(h >= 0) and np.all(h <= inst.hbar_units))
    return OptimalityCertificate(
        ok=bool(ok and marg and within),
        min_reduced_cost=Fraction(0) if min_rc is None else min_rc,
        max_abs_two_sided=max_two,
        marginals_exact=marg,
        within_capacity=within,
    )
