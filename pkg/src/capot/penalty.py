"""Quadratically penalized transport problem and its affine dual.

The marginal constraints are replaced by the penalty

    I_eps(h) = <c, h> + |rowsum(h) - f|^2 / (2 eps) + |colsum(h) - g|^2 / (2 eps)

minimized over the box ``0 <= h <= hbar``. At a minimizer ``h_eps`` the dual
potentials are read off directly from the marginal defects,

    u = (rowsum(h_eps) - f) / eps,   v = (colsum(h_eps) - g) / eps,
    w = min(c + u + v, 0),

and ``I_eps(h_eps)`` equals the dual value
``J(u, v, w) - eps/2 (|u|^2 + |v|^2)`` with ``J = -<u,f> - <v,g> + <w,hbar>``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .instance import CouplingMatrix, TransportInstance

__all__ = [
    "CostBreakdown",
    "DualValues",
    "DualTriple",
    "PenalizedSolution",
    "CertificateReport",
    "IterationLimitError",
    "DualInfeasibleError",
    "evaluate_costs",
    "gradient",
    "kkt_residual",
    "solve_penalized",
    "dual_from_primal",
    "dual_values",
    "certify",
    "default_tau_active",
]

log = logging.getLogger(__name__)


class IterationLimitError(RuntimeError):
    """Raised when the solver exhausts ``max_iter`` before meeting ``tol_kkt``.

    ``best`` holds the iterate with the smallest KKT residual seen.
    """

    def __init__(self, best: "PenalizedSolution", tol_kkt: float):
        self.best = best
        self.residual = best.kkt_residual
        self.tol_kkt = tol_kkt
        super().__init__(
            f"no KKT point within {best.iterations} iterations at eps={best.eps!r}: "
            f"best residual {best.kkt_residual!r} > tol {tol_kkt!r}"
        )


class DualInfeasibleError(ValueError):
    """A dual triple violates ``w <= 0`` or ``c + u + v - w >= 0``."""


class CostBreakdown(NamedTuple):
    linear: float
    penalty_x: float
    penalty_y: float
    relaxed: float


class DualValues(NamedTuple):
    J: float
    J_eps: float


@dataclass(frozen=True, eq=False)
class DualTriple:
    """Potentials on sources (``u``), sinks (``v``) and cells (``w``).

    ``eps`` records the penalty parameter the triple was built at; ``0``
    marks a triple not tied to any penalized solve.
    """

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    eps: float = 0.0

    def violation(self, inst: TransportInstance) -> float:
        """Largest violation of the feasibility conditions on the support."""
        sup = inst.support
        slack = inst.cost + self.u[:, None] + self.v[None, :] - self.w
        worst = 0.0
        if sup.any():
            worst = max(worst, float(np.max(self.w[sup])), float(np.max(-slack[sup])))
        return max(worst, 0.0)

    def is_feasible(self, inst: TransportInstance, atol: float = 0.0) -> bool:
        return self.violation(inst) <= atol


@dataclass(frozen=True, eq=False)
class PenalizedSolution:
    h_eps: CouplingMatrix
    eps: float
    iterations: int
    kkt_residual: float
    relaxed_value: float
    linear_value: float
    marginal_residual_x: float
    marginal_residual_y: float
    active_upper: tuple[tuple[int, int], ...]
    active_lower: tuple[tuple[int, int], ...]
    history: tuple[float, ...] | None = field(default=None, repr=False)

    @property
    def h(self) -> np.ndarray:
        return self.h_eps.h


@dataclass(frozen=True)
class CertificateReport:
    duality_identity_residual: float
    comp_slack_1: float
    comp_slack_2: float
    el_violation: float
    dual_feasible: bool


def _as_array(h) -> np.ndarray:
    return h.h if isinstance(h, CouplingMatrix) else np.asarray(h, dtype=float)


def _check_shape(inst: TransportInstance, h: np.ndarray) -> None:
    if h.shape != inst.shape:
        raise ValueError(f"plan has shape {h.shape}, instance is {inst.shape}")


def default_tau_active(inst: TransportInstance) -> float:
    return 1e-7 * float(inst.hbar.max(initial=0.0))


def evaluate_costs(inst: TransportInstance, h, eps: float) -> CostBreakdown:
    """Linear cost, the two marginal penalties and their sum."""
    h = _as_array(h)
    _check_shape(inst, h)
    if eps <= 0:
        raise ValueError("eps must be positive")
    rx = h.sum(axis=1) - inst.f
    ry = h.sum(axis=0) - inst.g
    linear = float(np.sum(inst.cost * h))
    px = float(rx @ rx) / (2 * eps)
    py = float(ry @ ry) / (2 * eps)
    return CostBreakdown(linear, px, py, linear + px + py)


def _grad(cost, f, g, h, eps):
    u = (h.sum(axis=1) - f) / eps
    v = (h.sum(axis=0) - g) / eps
    return cost + u[:, None] + v[None, :]


def gradient(inst: TransportInstance, h, eps: float) -> np.ndarray:
    """First variation ``c_ij + u_i + v_j`` of the relaxed cost at ``h``."""
    h = _as_array(h)
    _check_shape(inst, h)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return _grad(inst.cost, inst.f, inst.g, h, eps)


def _kkt(G, h, hbar, support) -> float:
    at_low = h <= 0.0
    at_up = h >= hbar
    r = np.abs(G)
    r = np.where(at_low, np.maximum(-G, 0.0), r)
    r = np.where(at_up, np.maximum(G, 0.0), r)
    r = np.where(support, r, 0.0)
    return float(r.max(initial=0.0))


def kkt_residual(inst: TransportInstance, h, eps: float) -> float:
    """Worst violation of the box-constrained first-order conditions.

    A cell at ``0`` may have a nonnegative gradient, a cell at ``hbar`` a
    nonpositive one; interior cells need a zero gradient. Cells outside the
    support of ``hbar`` are ignored.
    """
    h = _as_array(h)
    G = gradient(inst, h, eps)
    return _kkt(G, h, inst.hbar, inst.support)


def _active_sets(h, hbar, support, tau):
    up = np.argwhere(support & (h >= hbar - tau))
    low = np.argwhere(support & (h <= tau))
    return tuple(map(tuple, up.tolist())), tuple(map(tuple, low.tolist()))


def _package(inst, h, eps, iterations, residual, tau, history) -> PenalizedSolution:
    costs = evaluate_costs(inst, h, eps)
    up, low = _active_sets(h, inst.hbar, inst.support, tau)
    return PenalizedSolution(
        h_eps=CouplingMatrix(h),
        eps=float(eps),
        iterations=iterations,
        kkt_residual=residual,
        relaxed_value=costs.relaxed,
        linear_value=costs.linear,
        marginal_residual_x=float(np.linalg.norm(h.sum(axis=1) - inst.f)),
        marginal_residual_y=float(np.linalg.norm(h.sum(axis=0) - inst.g)),
        active_upper=up,
        active_lower=low,
        history=None if history is None else tuple(history),
    )


def _initial_plan(inst: TransportInstance, init) -> np.ndarray:
    if init is None or (isinstance(init, str) and init == "zero"):
        return np.zeros(inst.shape)
    if isinstance(init, str) and init == "hbar":
        return inst.hbar.copy()
    h = np.array(_as_array(init), dtype=float)
    _check_shape(inst, h)
    hb = inst.hbar
    if np.any(h < 0) or np.any(h > hb):
        raise ValueError("initial plan must satisfy 0 <= h <= hbar")
    return h


def solve_penalized(
    inst: TransportInstance,
    eps: float,
    init=None,
    tol_kkt: float = 1e-8,
    max_iter: int = 200_000,
    *,
    momentum: bool = False,
    tau_active: float | None = None,
    record_history: bool = False,
) -> PenalizedSolution:
    """Minimize the relaxed cost over ``0 <= h <= hbar``.

    Projected gradient descent with the fixed step ``eps / (m + n)``, which
    is the reciprocal of the largest eigenvalue of the penalty Hessian, so the
    objective never increases. With ``momentum=True`` a FISTA extrapolation
    is used and restarted whenever the objective goes up.

    Args:
        inst: problem data.
        eps: penalty parameter, > 0.
        init: ``None``/``"zero"``, ``"hbar"``, or a plan inside the box.
        tol_kkt: stop once :func:`kkt_residual` is at most this.
        max_iter: projected-gradient steps allowed.
        tau_active: band for reporting active sets; defaults to
            ``1e-7 * max(hbar)``.
        record_history: keep the objective value of every iterate.

    Raises:
        IterationLimitError: carrying the best iterate found.
    """
    if eps <= 0 or tol_kkt <= 0:
        raise ValueError("eps and tol_kkt must be positive")
    m, n = inst.shape
    cost, f, g, hbar, sup = inst.cost, inst.f, inst.g, inst.hbar, inst.support
    tau = default_tau_active(inst) if tau_active is None else tau_active
    step = eps / (m + n)
    h = _initial_plan(inst, init)
    history = [] if record_history else None

    def objective(x):
        rx = x.sum(axis=1) - f
        ry = x.sum(axis=0) - g
        return float(np.sum(cost * x)) + (float(rx @ rx) + float(ry @ ry)) / (2 * eps)

    best_h, best_r = h, np.inf
    h_prev = h
    t_mom = 1.0
    f_cur = objective(h) if (momentum or record_history) else 0.0
    for k in range(max_iter + 1):
        G = _grad(cost, f, g, h, eps)
        r = _kkt(G, h, hbar, sup)
        if record_history:
            history.append(f_cur)
        if r < best_r:
            best_h, best_r = h, r
        if r <= tol_kkt:
            log.debug("converged eps=%g in %d iterations (kkt %.3e)", eps, k, r)
            return _package(inst, h, eps, k, r, tau, history)
        if k == max_iter:
            break
        if not momentum:
            h = np.clip(h - step * G, 0.0, hbar)
            if record_history:
                f_cur = objective(h)
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = h + ((t_mom - 1.0) / t_next) * (h - h_prev)
        Gy = _grad(cost, f, g, y, eps)
        h_new = np.clip(y - step * Gy, 0.0, hbar)
        f_new = objective(h_new)
        if f_new > f_cur:
            # restart from a plain projected step
            t_next = 1.0
            h_new = np.clip(h - step * G, 0.0, hbar)
            f_new = objective(h_new)
        h_prev, h, f_cur, t_mom = h, h_new, f_new, t_next
    raise IterationLimitError(_package(inst, best_h, eps, max_iter, best_r, tau, history), tol_kkt)


def dual_from_primal(inst: TransportInstance, sol: PenalizedSolution) -> DualTriple:
    """Dual potentials read off from the marginal defects of ``sol``."""
    h, eps = sol.h, sol.eps
    u = (h.sum(axis=1) - inst.f) / eps
    v = (h.sum(axis=0) - inst.g) / eps
    w = np.minimum(inst.cost + u[:, None] + v[None, :], 0.0)
    return DualTriple(u, v, w, eps)


def dual_values(inst: TransportInstance, t: DualTriple, eps: float | None = None, atol: float = 0.0) -> DualValues:
    """Dual objective ``J`` and its penalized version ``J_eps``.

    ``eps`` defaults to the triple's own ``eps``.

    Raises:
        DualInfeasibleError: if the triple is not dual feasible within ``atol``.
    """
    eps = t.eps if eps is None else eps
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    bad = t.violation(inst)
    if bad > atol:
        raise DualInfeasibleError(f"dual triple infeasible by {bad!r}")
    # cells off the support carry hbar = 0, so w there does not matter
    J = -float(t.u @ inst.f) - float(t.v @ inst.g) + float(np.sum(np.where(inst.support, t.w * inst.hbar, 0.0)))
    J_eps = J - 0.5 * eps * (float(t.u @ t.u) + float(t.v @ t.v)) if eps > 0 else J
    return DualValues(J, J_eps)


def certify(
    inst: TransportInstance,
    sol: PenalizedSolution,
    t: DualTriple,
    tau_active: float | None = None,
) -> CertificateReport:
    """Residuals of the relaxed duality identity and its complementarity terms.

    The sign conditions are checked on the tolerance-banded active sets:
    ``c + u + v <= 0`` where ``h`` is at its cap and ``>= 0`` elsewhere on the
    support. For cells strictly inside the band both signs are required.
    """
    tau = default_tau_active(inst) if tau_active is None else tau_active
    h, hbar, sup = sol.h, inst.hbar, inst.support
    costs = evaluate_costs(inst, h, sol.eps)
    dv = dual_values(inst, t, sol.eps, atol=np.inf)
    red = inst.cost + t.u[:, None] + t.v[None, :]
    cs1 = np.where(sup, np.abs((red - t.w) * h), 0.0)
    cs2 = np.where(sup, np.abs(t.w * (hbar - h)), 0.0)
    upper = sup & (h >= hbar - tau)
    lower = sup & (h <= tau)
    el = np.zeros_like(h)
    el = np.where(upper, np.maximum(red, 0.0), el)
    el = np.where(sup & ~upper, np.maximum(-red, 0.0), el)
    el = np.where(sup & ~upper & ~lower, np.abs(red), el)
    return CertificateReport(
        duality_identity_residual=abs(costs.relaxed - dv.J_eps),
        comp_slack_1=float(cs1.max(initial=0.0)),
        comp_slack_2=float(cs2.max(initial=0.0)),
        el_violation=float(el.max(initial=0.0)),
        dual_feasible=t.is_feasible(inst),
    )
