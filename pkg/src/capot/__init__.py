"""Capacity-constrained optimal transport on discrete grids via quadratic penalization."""

from .continuation import SweepReport, SweepRow, SweepSchedule, sweep
from .feasibility import FeasibilityVerdict, InfeasibleInstanceError, kellerer_check, maxflow_feasible
from .instance import CouplingMatrix, TransportInstance, gen_random, load_and_validate, save
from .lp_toy import LPInstance, lp_sweep, lp_vertex_oracle, solve_penalized_lp
from .oracle import ExactSolution, check_certificate, mcf_solve
from .penalty import (
    DualTriple,
    PenalizedSolution,
    certify,
    dual_from_primal,
    dual_values,
    evaluate_costs,
    gradient,
    kkt_residual,
    solve_penalized,
)

__version__ = "0.1.0"

__all__ = [
    "CouplingMatrix",
    "DualTriple",
    "ExactSolution",
    "FeasibilityVerdict",
    "InfeasibleInstanceError",
    "LPInstance",
    "PenalizedSolution",
    "SweepReport",
    "SweepRow",
    "SweepSchedule",
    "TransportInstance",
    "certify",
    "check_certificate",
    "dual_from_primal",
    "dual_values",
    "evaluate_costs",
    "gen_random",
    "gradient",
    "kellerer_check",
    "kkt_residual",
    "load_and_validate",
    "lp_sweep",
    "lp_vertex_oracle",
    "maxflow_feasible",
    "mcf_solve",
    "save",
    "solve_penalized",
    "solve_penalized_lp",
    "sweep",
]
