"""Command-line interface.

Subcommands: solve (one equilibrium, exact or sampled), experiment (the
seeded consistency study with CSV/JSON/figure outputs), bounds (guarantee
constants for an instance), check (test a flow against the equilibrium
principle), validate (spec well-formedness).

Exit codes: 0 success, 1 malformed input, 2 solver or experiment did not
converge, 3 equilibrium check violated.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .bounds import bounds_report, covering_number, exponential_constants, sample_complexity
from .equilibrium import SolverConfig, ViProblem, check_wardrop, solve
from .costs import cvar_operator
from .game import FeasibleSet, is_feasible, validate_spec
from .saa import (
    ExperimentConfig,
    ExperimentError,
    empirical_cdf,
    run_experiment,
    solve_saa,
    write_cdf_csv,
    write_runs_csv,
    write_summary_json,
)
from .specio import SpecFormatError, load_flow, load_spec, result_to_json
from .uncertainty import sample

OK, BAD_INPUT, NO_CONVERGENCE, CHECK_FAILED = 0, 1, 2, 3


class _InvalidSpec(Exception):
    def __init__(self, violations: list[str]) -> None:
        super().__init__("spec failed validation")
        self.violations = violations


def _load_valid_spec(path: str):
    spec = load_spec(path)
    violations = validate_spec(spec)
    if violations:
        raise _InvalidSpec(violations)
    return spec


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(max_iters=args.max_iters, residual_tol=args.tol)


def _operator(spec, mode: str, n: int | None, seed: int):
    if mode == "exact":
        return cvar_operator(spec)
    if n is None:
        raise SpecFormatError("--n is required for --mode saa")
    return cvar_operator(spec, sample(spec.uncertainty, n, seed))


def cmd_solve(args: argparse.Namespace) -> int:
    spec = _load_valid_spec(args.spec)
    config = _solver_config(args)
    if args.mode == "exact":
        res = solve(ViProblem(operator=cvar_operator(spec),
                              feasible=FeasibleSet.from_spec(spec)), config)
    else:
        if args.n is None:
            raise SpecFormatError("--n is required for --mode saa")
        res = solve_saa(spec, sample(spec.uncertainty, args.n, args.seed), config)
    _emit(result_to_json(res, spec, args.mode), args.out)
    if not res.converged:
        print(f"did not converge: residual {res.residual:.3e} after {res.iterations} iterations",
              file=sys.stderr)
        return NO_CONVERGENCE
    return OK


def cmd_experiment(args: argparse.Namespace) -> int:
    spec = _load_valid_spec(args.spec)
    sizes = tuple(int(s) for s in args.sizes.split(","))
    reference = load_flow(args.reference, spec.num_paths) if args.reference else None
    config = ExperimentConfig(
        spec=spec,
        sample_sizes=sizes,
        runs_per_size=args.runs,
        base_seed=args.base_seed,
        solver=_solver_config(args),
        reference=reference,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    code = OK
    try:
        result = run_experiment(config, jobs=args.jobs)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        result = exc.result
        code = NO_CONVERGENCE
    _write_experiment_outputs(result, out_dir, figures=not args.no_figures)
    sys.stdout.write(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    return code


def _write_experiment_outputs(result, out_dir: Path, figures: bool) -> None:
    write_runs_csv(result, out_dir / "runs.csv")
    for n in result.sample_sizes:
        write_cdf_csv(empirical_cdf(result.distances[n]), out_dir / f"cdf_n{n}.csv")
    write_summary_json(result, out_dir / "summary.json")
    _write_sidecar(out_dir / "run_info.json")
    if figures:
        from . import figures as _figures

        _figures.render_cdf_figure(result, out_dir / "cdf.png")
        _figures.render_quantile_figure(result, out_dir / "quantiles.png")


def _write_sidecar(path: Path) -> None:
    # Clock and machine facts live here so the result payloads stay
    # byte-deterministic.
    try:
        from importlib.metadata import version

        ver = version("cvarroute")
    except Exception:
        ver = "unknown"
    doc = {
        "tool": f"cvarroute {ver}",
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_bounds(args: argparse.Namespace) -> int:
    spec = _load_valid_spec(args.spec)
    rep = bounds_report(spec)
    k = covering_number(rep.lipschitz, rep.diameter, rep.alpha, args.delta, rep.num_paths)
    gamma, beta = exponential_constants(
        rep.lipschitz, rep.diameter, rep.alpha, args.delta, rep.num_paths,
        rep.cost_low, rep.cost_high)
    n_needed = sample_complexity(
        args.zeta, args.delta, rep.lipschitz, rep.diameter, rep.alpha,
        rep.num_paths, rep.cost_low, rep.cost_high)
    doc = {
        "alpha": rep.alpha,
        "num_paths": rep.num_paths,
        "cost_low": rep.cost_low,
        "cost_high": rep.cost_high,
        "cost_bounds_exact": rep.cost_bounds_exact,
        "lipschitz": rep.lipschitz,
        "diameter": rep.diameter,
        "risk_objective_low": rep.phi_low,
        "risk_objective_high": rep.phi_high,
        "epsilon": args.epsilon,
        "delta": args.delta,
        "delta_is_user_supplied": True,
        "zeta": args.zeta,
        "covering_number": k,
        "gamma": gamma,
        "beta": beta,
        "sample_complexity": n_needed,
    }
    _emit(doc, args.out)
    return OK


def cmd_check(args: argparse.Namespace) -> int:
    spec = _load_valid_spec(args.spec)
    flow = load_flow(args.flow, spec.num_paths)
    fs = FeasibleSet.from_spec(spec)
    feasible, violation = is_feasible(flow, fs)
    if not feasible:
        print(f"flow is infeasible: worst constraint violation {violation:.3e}", file=sys.stderr)
        return CHECK_FAILED
    op = _operator(spec, args.mode, args.n, args.seed)
    rep = check_wardrop(spec, op, flow, args.tol)
    doc = {
        "satisfied": rep.satisfied,
        "tolerance": args.tol,
        "max_violation": rep.max_violation,
        "od_violations": rep.od_violations,
        "mode": args.mode,
    }
    _emit(doc, args.out)
    return OK if rep.satisfied else CHECK_FAILED


def cmd_validate(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec)
    violations = validate_spec(spec)
    _emit({"valid": not violations, "violations": violations}, args.out)
    return OK if not violations else BAD_INPUT


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cvarroute",
        description="Risk-averse routing equilibria: solve, experiment, and bound.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_spec(p):
        p.add_argument("--spec", required=True,
                       help="spec JSON path, or 'golden' for the bundled instance")
        p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")

    p = sub.add_parser("solve", help="compute one equilibrium")
    add_spec(p)
    p.add_argument("--mode", choices=("exact", "saa"), default="exact")
    p.add_argument("--n", type=int, default=None, help="sample count (saa mode)")
    p.add_argument("--seed", type=int, default=0, help="sample seed (saa mode)")
    p.add_argument("--tol", type=float, default=1e-8, help="residual tolerance")
    p.add_argument("--max-iters", type=int, default=20000)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("experiment", help="seeded consistency experiment")
    add_spec(p)
    p.add_argument("--sizes", default="50,500,5000", help="comma-separated sample sizes")
    p.add_argument("--runs", type=int, default=100, help="runs per sample size")
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallel workers (default: logical CPUs)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=20000)
    p.add_argument("--reference", default=None,
                   help="flow JSON to measure distances against (default: exact equilibrium)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bounds", help="guarantee constants for an instance")
    add_spec(p)
    p.add_argument("--epsilon", type=float, required=True,
                   help="target equilibrium accuracy (echoed in the report)")
    p.add_argument("--delta", type=float, required=True,
                   help="operator deviation threshold the constants are evaluated at")
    p.add_argument("--zeta", type=float, required=True, help="target failure probability")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("check", help="test a flow against the equilibrium principle")
    add_spec(p)
    p.add_argument("--flow", required=True, help="flow JSON (array or {'flow': [...]})")
    p.add_argument("--tol", type=float, default=1e-6, help="max allowed risk gap on used paths")
    p.add_argument("--mode", choices=("exact", "saa"), default="exact")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("validate", help="check spec well-formedness")
    add_spec(p)
    p.set_defaults(func=cmd_validate)
    return ap


def run(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _InvalidSpec as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return BAD_INPUT
    except (SpecFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT


def main() -> None:
    sys.exit(run())
