"""Drive the penalty parameter to zero with warm starts.

Each row of a sweep records the penalized solution at one ``eps`` together
with the dual triple built from it. As ``eps`` shrinks, the transport cost
of ``h_eps`` and the dual value ``J`` of the recovered triple close in on the
exact optimum from opposite sides, and ``eps |u|^2``, ``eps |v|^2`` vanish.
"""

from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .feasibility import InfeasibleInstanceError, maxflow_feasible
from .instance import TransportInstance
from .oracle import ExactSolution, mcf_solve
from .penalty import (
    CertificateReport,
    IterationLimitError,
    PenalizedSolution,
    certify,
    dual_from_primal,
    dual_values,
    solve_penalized,
)

__all__ = ["SweepSchedule", "SweepRow", "SweepReport", "SweepError", "SWEEP_COLUMNS", "sweep", "sweep_row"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepSchedule:
    """Geometric sequence ``eps0 * ratio**k`` for ``k < steps``."""

    eps0: float = 1.0
    ratio: float = 0.5
    steps: int = 18
    tol_kkt: float = 1e-8
    max_iter: int = 200_000

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if not self.tol_kkt > 0:
            raise ValueError("tol_kkt must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not self.eps0 * self.ratio ** (self.steps - 1) > 0:
            raise ValueError("schedule underflows to eps = 0")

    def epsilons(self) -> list[float]:
        return [self.eps0 * self.ratio**k for k in range(self.steps)]


@dataclass(frozen=True)
class SweepRow:
    eps: float
    relaxed_value: float
    linear_value: float
    dual_J: float
    dual_J_eps: float
    eps_u_norm_sq: float
    eps_v_norm_sq: float
    marginal_residual_sq: float
    oracle_gap: float | None
    iterations: int


SWEEP_COLUMNS = tuple(f.name for f in fields(SweepRow))


@dataclass(frozen=True, eq=False)
class SweepReport:
    rows: tuple[SweepRow, ...]
    final_primal_estimate: float
    final_dual_estimate: float
    oracle_value: float | None = None
    certificates: tuple[CertificateReport, ...] = ()
    solutions: tuple[PenalizedSolution, ...] = ()

    def summary(self) -> dict:
        last = self.rows[-1] if self.rows else None
        return {
            "rows": len(self.rows),
            "final_eps": None if last is None else last.eps,
            "final_primal_estimate": self.final_primal_estimate,
            "final_dual_estimate": self.final_dual_estimate,
            "oracle_value": self.oracle_value,
            "final_oracle_gap": None if last is None else last.oracle_gap,
            "max_duality_identity_residual": max((c.duality_identity_residual for c in self.certificates), default=None),
            "total_iterations": sum(r.iterations for r in self.rows),
        }

    def table(self) -> list[tuple]:
        return [astuple(r) for r in self.rows]


class SweepError(RuntimeError):
    """A solve inside the sweep failed; ``partial`` holds the rows completed so far."""

    def __init__(self, partial: SweepReport, cause: Exception):
        self.partial = partial
        self.cause = cause
        super().__init__(f"sweep stopped after {len(partial.rows)} rows: {cause}")


def sweep_row(inst: TransportInstance, sol: PenalizedSolution, optimum: float | None = None):
    """Row quantities and certificate for one penalized solution."""
    triple = dual_from_primal(inst, sol)
    dv = dual_values(inst, triple)
    eps = sol.eps
    gap = None
    if optimum is not None:
        gap = max(abs(sol.linear_value - optimum), abs(dv.J - optimum))
    row = SweepRow(
        eps=eps,
        relaxed_value=sol.relaxed_value,
        linear_value=sol.linear_value,
        dual_J=dv.J,
        dual_J_eps=dv.J_eps,
        eps_u_norm_sq=eps * float(triple.u @ triple.u),
        eps_v_norm_sq=eps * float(triple.v @ triple.v),
        marginal_residual_sq=sol.marginal_residual_x**2 + sol.marginal_residual_y**2,
        oracle_gap=gap,
        iterations=sol.iterations,
    )
    return row, certify(inst, sol, triple)


def _report(rows, certs, sols, optimum) -> SweepReport:
    primal = rows[-1].linear_value if rows else math.nan
    dual = rows[-1].dual_J if rows else math.nan
    return SweepReport(tuple(rows), primal, dual, optimum, tuple(certs), tuple(sols))


def sweep(
    inst: TransportInstance,
    sched: SweepSchedule | None = None,
    *,
    oracle: bool | ExactSolution = False,
    momentum: bool = True,
    init=None,
) -> SweepReport:
    """Solve the penalized problem along ``sched``, warm-starting each step.

    Args:
        inst: a feasible instance.
        sched: the eps schedule; defaults to ``SweepSchedule()``.
        oracle: ``True`` to compute the exact optimum with :func:`mcf_solve`,
            or a precomputed :class:`ExactSolution`. Fills ``oracle_gap``.
        momentum: use the restarted accelerated variant of the inner solver.
        init: starting plan for the first (largest) eps.

    Raises:
        InfeasibleInstanceError: before any solve, if no plan exists.
        SweepError: wrapping an inner :class:`IterationLimitError`.
    """
    sched = sched or SweepSchedule()
    verdict = maxflow_feasible(inst)
    if not verdict.feasible:
        raise InfeasibleInstanceError(verdict)
    optimum = None
    if isinstance(oracle, ExactSolution):
        optimum = oracle.value
    elif oracle:
        optimum = mcf_solve(inst).value

    rows, certs, sols = [], [], []
    h = init
    for eps in sched.epsilons():
        try:
            sol = solve_penalized(inst, eps, init=h, tol_kkt=sched.tol_kkt, max_iter=sched.max_iter, momentum=momentum)
        except IterationLimitError as exc:
            raise SweepError(_report(rows, certs, sols, optimum), exc) from exc
        row, cert = sweep_row(inst, sol, optimum)
        log.info("eps=%.3e iters=%d linear=%.10f J=%.10f", eps, sol.iterations, row.linear_value, row.dual_J)
        rows.append(row)
        certs.append(cert)
        sols.append(sol)
        h = np.array(sol.h)
    return _report(rows, certs, sols, optimum)
