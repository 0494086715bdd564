"""Command-line front end.

Exit codes: 0 success, 1 infeasible instance (certificate printed),
2 usage or input error, 3 solver did not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .continuation import SWEEP_COLUMNS, SweepError, SweepSchedule, sweep
from .feasibility import InfeasibleInstanceError, kellerer_check, maxflow_feasible
from .instance import InstanceError, gen_random, load_and_validate, dumps
from .lp_toy import LP_SWEEP_COLUMNS, LPInstance, LPIterationLimitError, lp_sweep, lp_vertex_oracle, solve_penalized_lp
from .oracle import check_certificate, mcf_solve
from .penalty import IterationLimitError, certify, dual_from_primal, dual_values, solve_penalized

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3

log = logging.getLogger("capot")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    instance_paths: list[Path] = field(default_factory=list)
    output_path: Path | None = None
    params: dict = field(default_factory=dict)

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        paths = getattr(ns, "instance", None)
        if paths is None:
            paths = []
        elif not isinstance(paths, list):
            paths = [paths]
        skip = {"command", "instance", "output", "verbose", "func"}
        params = {k: v for k, v in vars(ns).items() if k not in skip}
        out = getattr(ns, "output", None)
        return cls(ns.command, [Path(p) for p in paths], None if out is None else Path(out), params)


# -- rendering ---------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def render_json(obj) -> str:
    # floats go through repr: shortest round-trip decimal
    return json.dumps(_jsonable(obj), indent=2)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


# -- argument types ------------------------------------------------------------


def _positive(kind):
    def parse(s):
        try:
            v = kind(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a valid {kind.__name__}: {s!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {s!r}")
        return v

    parse.__name__ = f"positive {kind.__name__}"
    return parse


def _unit_interval(s):
    v = float(s)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1]: {s!r}")
    return v


def _open_interval(s):
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1): {s!r}")
    return v


# -- subcommands ---------------------------------------------------------------


def cmd_gen(cfg: RunConfig) -> int:
    p = cfg.params
    inst = gen_random(p["seed"], p["m"], p["n"], p["slack"])
    _emit(dumps(inst), cfg.output_path)
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    inst = load_and_validate(cfg.instance_paths[0])
    out = {"valid": True, "m": inst.m, "n": inst.n, "denom": inst.denom, "support_cells": int(inst.support.sum())}
    _emit(render_json(out) + "\n", cfg.output_path)
    return EXIT_OK


def cmd_check_feasibility(cfg: RunConfig) -> int:
    inst = load_and_validate(cfg.instance_paths[0])
    method = cfg.params["method"]
    verdicts = []
    if method in ("maxflow", "both"):
        verdicts.append(maxflow_feasible(inst))
    if method in ("kellerer", "both"):
        verdicts.append(kellerer_check(inst))
    feasible = all(v.feasible for v in verdicts)
    out = {"feasible": feasible, "verdicts": [v.to_dict() for v in verdicts]}
    if len({v.feasible for v in verdicts}) > 1:
        out["disagreement"] = True
    _emit(render_json(out) + "\n", cfg.output_path)
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def _load_matrix(path: Path, ndim: int | None = None) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        if text.lstrip().startswith("["):
            arr = np.asarray(json.loads(text), dtype=float)
        else:
            arr = np.loadtxt(io.StringIO(text), dtype=float, ndmin=ndim or 1)
    except ValueError as exc:
        raise UsageError(f"{path}: cannot parse numbers ({exc})") from exc
    return arr


def _init_plan(choice: str):
    if choice in ("zero", "hbar"):
        return choice
    return _load_matrix(Path(choice), 2)


def _solution_dict(inst, sol, triple, cert, dv) -> dict:
    return {
        "solution": {
            "eps": sol.eps,
            "iterations": sol.iterations,
            "kkt_residual": sol.kkt_residual,
            "relaxed_value": sol.relaxed_value,
            "linear_value": sol.linear_value,
            "marginal_residual_x": sol.marginal_residual_x,
            "marginal_residual_y": sol.marginal_residual_y,
            "active_upper": [list(c) for c in sol.active_upper],
            "active_lower": [list(c) for c in sol.active_lower],
            "h_eps": sol.h,
        },
        "dual": {"u": triple.u, "v": triple.v, "w": triple.w, "J": dv.J, "J_eps": dv.J_eps},
        "certificate": {
            "duality_identity_residual": cert.duality_identity_residual,
            "comp_slack_1": cert.comp_slack_1,
            "comp_slack_2": cert.comp_slack_2,
            "el_violation": cert.el_violation,
            "dual_feasible": cert.dual_feasible,
        },
    }


def cmd_solve(cfg: RunConfig) -> int:
    p = cfg.params
    inst = load_and_validate(cfg.instance_paths[0])
    init = _init_plan(p["init"])
    try:
        sol = solve_penalized(
            inst, p["eps"], init=init, tol_kkt=p["tol"], max_iter=p["max_iter"],
            momentum=p["momentum"], tau_active=p["tau_active"],
        )
        status = EXIT_OK
    except IterationLimitError as exc:
        log.error("%s", exc)
        sol, status = exc.best, EXIT_NO_CONVERGENCE
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    triple = dual_from_primal(inst, sol)
    cert = certify(inst, sol, triple, p["tau_active"])
    out = _solution_dict(inst, sol, triple, cert, dual_values(inst, triple))
    out["converged"] = status == EXIT_OK
    _emit(render_json(out) + "\n", cfg.output_path)
    return status


def _sweep_one(path: Path, sched: SweepSchedule, oracle: bool, momentum: bool):
    """Run one sweep; returns (csv_text, summary, exit_code)."""
    inst = load_and_validate(path)
    code = EXIT_OK
    try:
        rep = sweep(inst, sched, oracle=oracle, momentum=momentum)
    except InfeasibleInstanceError as exc:
        summary = {"instance": str(path), "feasible": False, "certificate": exc.verdict.to_dict()}
        return render_csv(SWEEP_COLUMNS, []), summary, EXIT_INFEASIBLE
    except SweepError as exc:
        rep, code = exc.partial, EXIT_NO_CONVERGENCE
    summary = {"instance": str(path), "feasible": True, "converged": code == EXIT_OK, **rep.summary()}
    return render_csv(SWEEP_COLUMNS, rep.table()), summary, code


def cmd_sweep(cfg: RunConfig) -> int:
    p = cfg.params
    sched = SweepSchedule(p["eps0"], p["ratio"], p["steps"], p["tol"], p["max_iter"])
    paths = cfg.instance_paths
    args = [(path, sched, p["oracle"], p["momentum"]) for path in paths]
    if p["jobs"] > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=p["jobs"]) as pool:
            results = list(pool.map(_sweep_one, *zip(*args)))
    else:
        results = [_sweep_one(*a) for a in args]

    if len(paths) == 1:
        table, summary, code = results[0]
        if cfg.output_path is None:
            sys.stdout.write(table + "\n" + render_json(summary) + "\n")
        else:
            cfg.output_path.write_text(table, encoding="utf-8")
            sys.stdout.write(render_json(summary) + "\n")
        return code

    if cfg.output_path is None:
        raise UsageError("sweeping several instances requires -o DIR")
    cfg.output_path.mkdir(parents=True, exist_ok=True)
    summaries = []
    seen: dict[str, int] = {}
    for path, (table, summary, _) in zip(paths, results):
        k = seen[path.stem] = seen.get(path.stem, -1) + 1
        name = path.stem if k == 0 else f"{path.stem}.{k}"
        target = cfg.output_path / (name + ".csv")
        target.write_text(table, encoding="utf-8")
        summaries.append({**summary, "csv": str(target)})
    sys.stdout.write(render_json(summaries) + "\n")
    return max(code for _, _, code in results)


def cmd_oracle(cfg: RunConfig) -> int:
    inst = load_and_validate(cfg.instance_paths[0])
    try:
        sol = mcf_solve(inst)
    except InfeasibleInstanceError as exc:
        _emit(render_json({"feasible": False, "certificate": exc.verdict.to_dict()}) + "\n", cfg.output_path)
        return EXIT_INFEASIBLE
    cert = check_certificate(inst, sol)
    out = {
        "feasible": True,
        **sol.to_dict(),
        "certificate": {
            "optimal": cert.ok,
            "min_reduced_cost_on_residual_arcs": float(cert.min_reduced_cost),
            "max_abs_reduced_cost_two_sided": float(cert.max_abs_two_sided),
            "marginals_exact": cert.marginals_exact,
            "within_capacity": cert.within_capacity,
            "basic": sol.fractional_cells <= inst.m + inst.n - 1,
        },
    }
    _emit(render_json(out) + "\n", cfg.output_path)
    return EXIT_OK


def cmd_lp(cfg: RunConfig) -> int:
    p = cfg.params
    try:
        lp = LPInstance(
            _load_matrix(p["A"], 2),
            _load_matrix(p["b"]),
            _load_matrix(p["c"]),
            None if p["ycap"] is None else _load_matrix(p["ycap"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    action = p["action"]
    if action == "oracle":
        res = lp_vertex_oracle(lp)
        _emit(render_json({"status": res.status, "value": res.value, "argmax": res.argmax}) + "\n", cfg.output_path)
        return EXIT_INFEASIBLE if res.status == "infeasible" else EXIT_OK
    if action == "solve":
        try:
            sol = solve_penalized_lp(lp, p["eps"], tol=p["tol"], max_iter=p["max_iter"], momentum=p["momentum"])
            code = EXIT_OK
        except LPIterationLimitError as exc:
            sol, code = exc.best, EXIT_NO_CONVERGENCE
        out = {k: getattr(sol, k) for k in sol.__dataclass_fields__}
        _emit(render_json(out) + "\n", cfg.output_path)
        return code
    sched = SweepSchedule(p["eps0"], p["ratio"], p["steps"], p["tol"], p["max_iter"])
    try:
        rows, res = lp_sweep(lp, sched, momentum=p["momentum"])
    except LPIterationLimitError as exc:
        log.error("%s", exc)
        return EXIT_NO_CONVERGENCE
    table = render_csv(LP_SWEEP_COLUMNS, [tuple(getattr(r, k) for k in LP_SWEEP_COLUMNS) for r in rows])
    summary = {"oracle_status": res.status, "oracle_value": res.value, "final_J_eps": rows[-1].J_eps}
    if cfg.output_path is None:
        sys.stdout.write(table + "\n" + render_json(summary) + "\n")
    else:
        cfg.output_path.write_text(table, encoding="utf-8")
        sys.stdout.write(render_json(summary) + "\n")
    return EXIT_INFEASIBLE if res.status == "infeasible" else EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capot",
        description="Capacity-constrained optimal transport by quadratic penalization.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def out_opt(p, help="write output here instead of stdout"):
        p.add_argument("-o", "--output", help=help)

    p = sub.add_parser("gen", help="generate a random feasible instance")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--m", type=_positive(int), required=True, help="number of sources")
    p.add_argument("--n", type=_positive(int), required=True, help="number of sinks")
    p.add_argument("--slack", type=_unit_interval, default=0.5, help="capacity slack in (0, 1] (default 0.5)")
    out_opt(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", help="parse and validate an instance file")
    p.add_argument("instance")
    out_opt(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("check-feasibility", help="decide whether any plan exists (exit 1 if not)")
    p.add_argument("instance")
    p.add_argument("--method", choices=("maxflow", "kellerer", "both"), default="maxflow")
    out_opt(p)
    p.set_defaults(func=cmd_check_feasibility)

    def solver_opts(p, tol=1e-8, max_iter=200_000, momentum=False):
        p.add_argument("--tol", type=_positive(float), default=tol, help=f"KKT tolerance (default {tol:g})")
        p.add_argument("--max-iter", type=_positive(int), default=max_iter, help=f"iteration cap (default {max_iter})")
        p.add_argument(
            "--momentum", action=argparse.BooleanOptionalAction, default=momentum,
            help="accelerated steps with restarts",
        )

    def schedule_opts(p):
        p.add_argument("--eps0", type=_positive(float), default=1.0)
        p.add_argument("--ratio", type=_open_interval, default=0.5)
        p.add_argument("--steps", type=_positive(int), default=18)

    p = sub.add_parser("solve", help="solve the penalized problem at one eps")
    p.add_argument("instance")
    p.add_argument("--eps", type=_positive(float), required=True)
    p.add_argument("--init", default="zero", help="zero, hbar, or a JSON/whitespace matrix file")
    p.add_argument("--tau-active", type=_positive(float), default=None, help="active-set band (default 1e-7*max hbar)")
    solver_opts(p)
    out_opt(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="eps -> 0 continuation; CSV table plus JSON summary")
    p.add_argument("instance", nargs="+")
    schedule_opts(p)
    solver_opts(p, momentum=True)
    p.add_argument("--oracle", action="store_true", help="compare against the exact min-cost-flow optimum")
    p.add_argument("--jobs", type=_positive(int), default=1, help="parallel workers across instances")
    out_opt(p, help="CSV file (one instance) or directory (several)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="exact optimum by min-cost flow")
    p.add_argument("instance")
    out_opt(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("lp", help="penalized LP duality: min b.y, y>=0, A^T y = c  vs  max c.x, Ax <= b")
    p.add_argument("--A", required=True, type=Path, help="m x n matrix (JSON or whitespace text)")
    p.add_argument("--b", required=True, type=Path)
    p.add_argument("--c", required=True, type=Path)
    p.add_argument("--ycap", type=Path, default=None)
    p.add_argument("--eps", type=_positive(float), default=1e-3)
    schedule_opts(p)
    solver_opts(p, tol=1e-10, max_iter=500_000, momentum=True)
    p.add_argument("action", choices=("solve", "sweep", "oracle"))
    out_opt(p)
    p.set_defaults(func=cmd_lp)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(ns.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    cfg = RunConfig.from_namespace(ns)
    try:
        return ns.func(cfg)
    except (InstanceError, UsageError) as exc:
        print(f"capot {cfg.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"capot {cfg.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"capot {cfg.subcommand}: error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
