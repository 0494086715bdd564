"""Is there any plan with the prescribed marginals under the capacities?

Two independent answers: exhaustive evaluation of the subset condition
``f(A) + g(B) - hbar(A x B) <= 1`` over all source/sink subsets, and an
exact max-flow computation on integer masses.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .instance import CouplingMatrix, TransportInstance
from .network import bipartite_network

__all__ = [
    "FeasibilityVerdict",
    "ViolatingPair",
    "EnumerationSizeError",
    "InfeasibleInstanceError",
    "KELLERER_MAX_SIZE",
    "kellerer_check",
    "maxflow_feasible",
    "subset_excess",
]

KELLERER_MAX_SIZE = 22


class EnumerationSizeError(ValueError):
    pass


class InfeasibleInstanceError(ValueError):
    """No plan satisfies the marginals and capacities; carries a certificate."""

    def __init__(self, verdict: "FeasibilityVerdict", message: str = "instance is infeasible"):
        self.verdict = verdict
        pair = verdict.violating_pair
        if pair is not None:
            message = f"{message}: sources {list(pair.A)}, sinks {list(pair.B)} exceed by {pair.excess!r}"
        super().__init__(message)


@dataclass(frozen=True)
class ViolatingPair:
    """Source set ``A`` and sink set ``B`` (0-based) with ``f(A)+g(B)-hbar(AxB) = 1 + excess``."""

    A: tuple[int, ...]
    B: tuple[int, ...]
    excess: Fraction

    def to_dict(self) -> dict:
        return {"A": list(self.A), "B": list(self.B), "excess": float(self.excess)}


@dataclass(frozen=True, eq=False)
class FeasibilityVerdict:
    feasible: bool
    witness_coupling: CouplingMatrix | None = None
    violating_pair: ViolatingPair | None = None
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "feasible": self.feasible,
            "witness": None if self.witness_coupling is None else self.witness_coupling.h.tolist(),
            "violating_pair": None if self.violating_pair is None else self.violating_pair.to_dict(),
        }


def subset_excess(inst: TransportInstance, A, B) -> Fraction:
    """Exact ``f(A) + g(B) - hbar(A x B) - 1`` for index collections A, B."""
    A, B = list(A), list(B)
    units = int(inst.f_units[A].sum()) + int(inst.g_units[B].sum()) - int(inst.hbar_units[np.ix_(A, B)].sum())
    return Fraction(units - inst.denom, inst.denom)


def _all_subset_sums(x: np.ndarray) -> np.ndarray:
    """Sums over every subset of the last axis; bit ``j`` of the index selects ``x[..., j]``."""
    out = np.zeros(x.shape[:-1] + (1,), dtype=np.int64)
    for j in range(x.shape[-1]):
        out = np.concatenate([out, out + x[..., j : j + 1]], axis=-1)
    return out


def _members(mask: int, size: int) -> tuple[int, ...]:
    return tuple(k for k in range(size) if mask >> k & 1)


def kellerer_check(inst: TransportInstance) -> FeasibilityVerdict:
    """Evaluate the subset condition on all ``2^m * 2^n`` pairs.

    Works in integer units, so the verdict is exact. No witness plan is
    produced; a violated instance reports the pair of largest excess.
    """
    m, n = inst.shape
    if m + n > KELLERER_MAX_SIZE:
        raise EnumerationSizeError(f"m + n = {m + n} exceeds enumeration bound {KELLERER_MAX_SIZE}")
    hb = inst.hbar_units.astype(np.int64)
    # hbar(A, j) for every source subset A, shape (2^m, n)
    cap_by_A = _all_subset_sums(hb.T).T
    f_A = _all_subset_sums(inst.f_units.astype(np.int64)[None, :])[0]
    # g(B) - hbar(A x B) for every (A, B), shape (2^m, 2^n)
    table = _all_subset_sums(inst.g_units[None, :] - cap_by_A) + f_A[:, None]
    flat = int(np.argmax(table))
    a_mask, b_mask = divmod(flat, table.shape[1])
    best = int(table[a_mask, b_mask])
    if best <= inst.denom:
        return FeasibilityVerdict(True, method="kellerer")
    pair = ViolatingPair(_members(a_mask, m), _members(b_mask, n), Fraction(best - inst.denom, inst.denom))
    return FeasibilityVerdict(False, violating_pair=pair, method="kellerer")


def maxflow_feasible(inst: TransportInstance) -> FeasibilityVerdict:
    """Exact max flow on the bipartite network; feasible iff all mass moves.

    On success the middle-arc flow is the witness plan. Otherwise the
    residual-reachable side of the minimum cut gives the violating pair:
    sources on the source side and sinks on the sink side.
    """
    m, n = inst.shape
    net, middle = bipartite_network(inst)
    s, t = 0, m + n + 1
    flow = net.max_flow(s, t)
    if flow == inst.denom:
        units = np.array([[net.flow_on(middle[i][j]) for j in range(n)] for i in range(m)], dtype=np.int64)
        return FeasibilityVerdict(True, witness_coupling=CouplingMatrix(units / inst.denom), method="maxflow")
    side = net.reachable(s)
    A = tuple(i for i in range(m) if side[1 + i])
    B = tuple(j for j in range(n) if not side[1 + m + j])
    pair = ViolatingPair(A, B, Fraction(inst.denom - flow, inst.denom))
    return FeasibilityVerdict(False, violating_pair=pair, method="maxflow")


def witness_units(inst: TransportInstance, verdict: FeasibilityVerdict) -> np.ndarray:
    """Witness plan in integer units of ``1/denom``."""
    return np.rint(verdict.witness_coupling.h * inst.denom).astype(np.int64)
