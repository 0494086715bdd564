"""Penalized linear programming duality in finite dimensions.

For ``min b.y  s.t.  y >= 0, A^T y = c`` the equality is replaced by the
penalty ``|A^T y - c|^2 / (2 eps)``. A minimizer ``y_eps`` determines the
dual point ``x_eps = (c - A^T y_eps) / eps`` affinely; it satisfies
``A x_eps <= b`` and ``b.y_eps + |A^T y_eps - c|^2/(2 eps) = c.x_eps - eps/2 |x_eps|^2``.
The exact value of ``max c.x  s.t.  A x <= b`` comes from brute-force vertex
enumeration.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .continuation import SweepSchedule

__all__ = [
    "LPInstance",
    "LPPenalizedSolution",
    "LPOracleResult",
    "LPSweepRow",
    "LP_SWEEP_COLUMNS",
    "LPIterationLimitError",
    "relaxed_value",
    "relaxed_dual_value",
    "solve_penalized_lp",
    "lp_vertex_oracle",
    "lp_sweep",
    "gen_random_lp",
]

log = logging.getLogger(__name__)

ORACLE_MAX_N = 8
ORACLE_MAX_M = 14


class LPIterationLimitError(RuntimeError):
    def __init__(self, best: "LPPenalizedSolution", tol: float):
        self.best = best
        super().__init__(f"no KKT point within {best.iterations} iterations at eps={best.eps!r} (residual {best.kkt_residual!r} > {tol!r})")


@dataclass(frozen=True, eq=False)
class LPInstance:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    ycap: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        if A.shape != (b.size, c.size):
            raise ValueError(f"A has shape {A.shape}, expected ({b.size}, {c.size})")
        for name, arr in (("A", A), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        if self.ycap is not None:
            cap = np.asarray(self.ycap, dtype=float).ravel()
            if cap.shape != b.shape or not np.all(cap > 0) or not np.all(np.isfinite(cap)):
                raise ValueError("ycap must be a finite positive vector of length m")
            object.__setattr__(self, "ycap", cap)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True, eq=False)
class LPPenalizedSolution:
    y_eps: np.ndarray
    x_eps: np.ndarray
    eps: float
    I_eps: float
    J_eps: float
    constraint_violation: float
    cap_active: bool
    diverged: bool
    iterations: int = 0
    kkt_residual: float = 0.0


@dataclass(frozen=True, eq=False)
class LPOracleResult:
    """``value`` is ``+inf`` when unbounded (``argmax`` is then an improving ray)
    and ``-inf`` when infeasible (``argmax`` is ``None``)."""

    value: float
    argmax: np.ndarray | None
    status: str


@dataclass(frozen=True)
class LPSweepRow:
    eps: float
    I_eps: float
    J_eps: float
    constraint_violation: float
    gap_vs_oracle: float | None
    identity_residual: float
    cap_active: bool
    diverged: bool
    iterations: int


LP_SWEEP_COLUMNS = tuple(LPSweepRow.__dataclass_fields__)


def relaxed_value(lp: LPInstance, y: np.ndarray, eps: float) -> float:
    r = lp.A.T @ y - lp.c
    return float(lp.b @ y) + float(r @ r) / (2 * eps)


def relaxed_dual_value(lp: LPInstance, x: np.ndarray, eps: float) -> float:
    return float(lp.c @ x) - 0.5 * eps * float(x @ x)


def _spectral_bound(A: np.ndarray, iters: int = 200) -> float:
    """Largest eigenvalue of ``A A^T`` by power iteration, padded by 1%."""
    M = A @ A.T
    if not np.any(M):
        return 0.0
    v = np.ones(M.shape[0]) + np.arange(M.shape[0]) * 1e-3
    lam = 0.0
    for _ in range(iters):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        new = float(v @ w) / float(v @ v)
        v = w / nw
        if abs(new - lam) <= 1e-12 * new:
            lam = new
            break
        lam = new
    return 1.01 * lam


def _lp_kkt(grad, y, cap) -> float:
    r = np.abs(grad)
    r = np.where(y <= 0.0, np.maximum(-grad, 0.0), r)
    if cap is not None:
        r = np.where(y >= cap, np.maximum(grad, 0.0), r)
    return float(r.max(initial=0.0))


def _package(lp, y, eps, k, res, diverged) -> LPPenalizedSolution:
    x = (lp.c - lp.A.T @ y) / eps
    viol = float(np.max(lp.A @ x - lp.b, initial=0.0))
    cap_active = bool(lp.ycap is not None and np.any(y >= lp.ycap))
    return LPPenalizedSolution(
        y_eps=y,
        x_eps=x,
        eps=float(eps),
        I_eps=relaxed_value(lp, y, eps),
        J_eps=relaxed_dual_value(lp, x, eps),
        constraint_violation=max(viol, 0.0),
        cap_active=cap_active,
        diverged=diverged,
        iterations=k,
        kkt_residual=res,
    )


def _is_recession(lp: LPInstance, d: np.ndarray) -> bool:
    """``d`` is a direction along which the relaxed cost decreases without bound."""
    nd = np.linalg.norm(d)
    if nd == 0 or np.any(d < -1e-12 * nd):
        return False
    d = np.maximum(d, 0.0)
    if lp.ycap is not None and np.any(d > 0):
        return False
    scale = max(1.0, float(np.abs(lp.A).max(initial=0.0)))
    return bool(np.linalg.norm(lp.A.T @ d) <= 1e-12 * scale * nd and lp.b @ d < -1e-12 * np.linalg.norm(lp.b) * nd)


def _face_minimizer(lp: LPInstance, y: np.ndarray, eps: float) -> np.ndarray | None:
    """Minimize the relaxed cost on the face of the box that ``y`` lies on.

    Coordinates at 0 or at the cap stay put; the free ones solve the normal
    equations ``A_F A_F^T y_F = A_F (c - A_U^T cap_U) - eps b_F`` in the
    least-squares sense. Returns ``None`` if the result leaves the box.
    """
    upper = np.inf if lp.ycap is None else lp.ycap
    free = (y > 0) & (y < upper)
    if not free.any():
        return None
    z = np.where(y >= upper, upper, 0.0)
    AF = lp.A[free]
    rhs = AF @ (lp.c - lp.A.T @ z) - eps * lp.b[free]
    zF, *_ = np.linalg.lstsq(AF @ AF.T, rhs, rcond=None)
    ub = np.inf if lp.ycap is None else lp.ycap[free]
    if np.any(zF < 0) or np.any(zF > ub):
        return None
    z[free] = zF
    return z


def solve_penalized_lp(
    lp: LPInstance,
    eps: float,
    tol: float = 1e-10,
    max_iter: int = 500_000,
    *,
    init=None,
    momentum: bool = False,
    check_every: int = 64,
    face_solve: bool = True,
) -> LPPenalizedSolution:
    """Projected gradient descent for ``b.y + |A^T y - c|^2/(2 eps)`` on ``y >= 0``.

    Uses the step ``eps / lambda_max(A A^T)``, with ``y`` also clipped to
    ``ycap`` when present. A run whose iterates blow past the norm guard
    ``1e8 (1 + |c|/eps)``, or that settles on a descent ray of the objective,
    comes back with ``diverged=True`` instead of raising.

    With ``face_solve`` every ``check_every`` steps the cost is also minimized
    exactly on the current face of the box (the set of coordinates pinned at
    a bound); the face point replaces the iterate when it stays in the box and
    lowers the cost. Degenerate instances where plain descent crawls along a
    face then finish in a few hundred steps.

    Raises:
        LPIterationLimitError: when ``max_iter`` steps do not reach ``tol``.
    """
    if eps <= 0 or tol <= 0:
        raise ValueError("eps and tol must be positive")
    A, b, c, cap = lp.A, lp.b, lp.c, lp.ycap
    L = _spectral_bound(A)
    step = eps / L if L > 0 else eps
    upper = np.inf if cap is None else cap
    guard = 1e8 * (1.0 + np.linalg.norm(c) / eps)
    y = np.zeros(lp.m) if init is None else np.clip(np.asarray(init, dtype=float), 0.0, upper)

    def obj(z):
        r = A.T @ z - c
        return float(b @ z) + float(r @ r) / (2 * eps)

    best_y, best_r = y, np.inf
    y_prev, t_mom, f_cur = y, 1.0, obj(y)
    anchor = y
    for k in range(max_iter + 1):
        grad = b + (A @ (A.T @ y - c)) / eps
        res = _lp_kkt(grad, y, cap)
        if res < best_r:
            best_y, best_r = y, res
        if res <= tol:
            return _package(lp, y, eps, k, res, False)
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) > guard:
            return _package(lp, y, eps, k, res, True)
        if k and k % check_every == 0:
            if _is_recession(lp, y - anchor):
                log.debug("descent ray detected at eps=%g after %d iterations", eps, k)
                return _package(lp, y, eps, k, res, True)
            anchor = y
            cand = _face_minimizer(lp, y, eps) if face_solve else None
            if cand is not None and obj(cand) < obj(y):
                y = y_prev = cand
                f_cur, t_mom = obj(cand), 1.0
                continue
        if k == max_iter:
            break
        if not momentum:
            y = np.clip(y - step * grad, 0.0, upper)
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        z = y + ((t_mom - 1.0) / t_next) * (y - y_prev)
        gz = b + (A @ (A.T @ z - c)) / eps
        y_new = np.clip(z - step * gz, 0.0, upper)
        f_new = obj(y_new)
        if f_new > f_cur:
            t_next = 1.0
            y_new = np.clip(y - step * grad, 0.0, upper)
            f_new = obj(y_new)
        y_prev, y, f_cur, t_mom = y, y_new, f_new, t_next
    raise LPIterationLimitError(_package(lp, best_y, eps, max_iter, best_r, False), tol)


# -- exact oracle ----------------------------------------------------------


def lp_vertex_oracle(lp: LPInstance, feas_tol: float = 1e-9) -> LPOracleResult:
    """``max c.x  s.t.  A x <= b`` by enumerating every basic solution.

    Directions in the null space of ``A`` are split off first so that the
    remaining polyhedron is pointed: it is then empty iff it has no vertex,
    and unbounded iff some extreme ray improves the objective.
    """
    A, b, c = lp.A, lp.b, lp.c
    m, n = A.shape
    if n > ORACLE_MAX_N or m > ORACLE_MAX_M:
        raise ValueError(f"vertex enumeration limited to n <= {ORACLE_MAX_N}, m <= {ORACLE_MAX_M}")
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    _, sv, Vt = np.linalg.svd(A) if m else (None, np.zeros(0), np.eye(n))
    r = int(np.sum(sv > 1e-10 * scale))
    rows_space, null_space = Vt[:r], Vt[r:]
    Ar = A @ rows_space.T
    cr = rows_space @ c
    c_null = null_space.T @ (null_space @ c) if r < n else np.zeros(n)

    def feasible(x):
        return bool(np.all(A @ x <= b + feas_tol * (1.0 + np.abs(b))))

    best_val, best_x = -np.inf, None
    if r == 0:
        x0 = np.zeros(n)
        if feasible(x0):
            best_val, best_x = 0.0, x0
    else:
        for S in itertools.combinations(range(m), r):
            M = Ar[list(S)]
            if abs(np.linalg.det(M)) <= 1e-12 * scale**r:
                continue
            z = np.linalg.solve(M, b[list(S)])
            x = rows_space.T @ z
            if feasible(x):
                val = float(c @ x)
                if val > best_val:
                    best_val, best_x = val, x
    if best_x is None:
        return LPOracleResult(-np.inf, None, "infeasible")
    if np.linalg.norm(c_null) > 1e-10 * max(1.0, np.linalg.norm(c)):
        return LPOracleResult(np.inf, c_null, "unbounded")
    # extreme rays of the pointed cone {z : Ar z <= 0}
    for S in itertools.combinations(range(m), r - 1):
        if r == 1:
            cands = [np.ones(1)]
        else:
            M = Ar[list(S)]
            _, s2, V2 = np.linalg.svd(M)
            if np.sum(s2 > 1e-10 * scale) != r - 1:
                continue
            cands = [V2[-1]]
        for d in cands:
            for sgn in (1.0, -1.0):
                ray = sgn * d
                if np.all(Ar @ ray <= 1e-9) and cr @ ray > 1e-9:
                    return LPOracleResult(np.inf, rows_space.T @ ray, "unbounded")
    return LPOracleResult(best_val, best_x, "optimal")


# -- continuation -------------------------------------------------------------


def lp_sweep(lp: LPInstance, sched: SweepSchedule, *, momentum: bool = True, oracle: LPOracleResult | None = None):
    """Warm-started penalized solves along ``sched`` with per-row checks.

    Returns ``(rows, oracle_result)``. ``identity_residual`` is
    ``|I_eps - J_eps|``; ``gap_vs_oracle`` is ``|J_eps - value|`` when the
    oracle reports an optimum. Diverged rows are kept and flagged, and the
    next row restarts from zero.
    """
    oracle = lp_vertex_oracle(lp) if oracle is None else oracle
    rows = []
    y = None
    for eps in sched.epsilons():
        sol = solve_penalized_lp(lp, eps, tol=sched.tol_kkt, max_iter=sched.max_iter, init=y, momentum=momentum)
        gap = abs(sol.J_eps - oracle.value) if oracle.status == "optimal" and not sol.diverged else None
        rows.append(
            LPSweepRow(
                eps=eps,
                I_eps=sol.I_eps,
                J_eps=sol.J_eps,
                constraint_violation=sol.constraint_violation,
                gap_vs_oracle=gap,
                identity_residual=abs(sol.I_eps - sol.J_eps),
                cap_active=sol.cap_active,
                diverged=sol.diverged,
                iterations=sol.iterations,
            )
        )
        y = None if sol.diverged else sol.y_eps
    return rows, oracle


def gen_random_lp(seed: int, m: int, n: int, cap_factor: float | None = 1e3) -> LPInstance:
    """Random LP whose maximum ``c.x`` over ``A x <= b`` sits at a planted point.

    ``A`` is uniform on [-1, 1]; ``b = A x* + s`` with ``x*`` uniform on
    [-1, 1]^n and ``s >= 0`` zero on ``n`` randomly chosen rows, and ``c`` is
    a positive combination of those rows, so ``x*`` is optimal with value
    ``c.x*``. ``ycap`` is ``cap_factor * (1 + max y0)`` where ``y0`` are the
    combination weights.
    """
    if m < n:
        raise ValueError("need m >= n to plant a vertex")
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.0, 1.0, size=(m, n))
    x_star = rng.uniform(-1.0, 1.0, size=n)
    active = rng.choice(m, size=n, replace=False)
    s = rng.uniform(0.0, 1.0, size=m)
    s[active] = 0.0
    b = A @ x_star + s
    y0 = np.zeros(m)
    y0[active] = rng.uniform(0.1, 1.0, size=n)
    c = A.T @ y0
    cap = None if cap_factor is None else np.full(m, cap_factor * (1.0 + y0.max()))
    return LPInstance(A, b, c, cap)
