"""Equilibrium computation as a variational inequality (VI) on the flow
polytope.

A flow h* is an equilibrium of the risk-adjusted game exactly when
F(h*) . (h - h*) >= 0 for every feasible h, where F maps a flow to the
per-path CVaR of cost. The solver is the extragradient method with
adaptive step backtracking; progress is measured by the natural residual
|| h - P(h - F(h)) ||, which is zero precisely at solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .game import FeasibleSet, GameSpec, project, uniform_split

# Backtracking accepts a step when tau*||F(h)-F(y)|| <= RATIO*||h-y||;
# rejected steps halve tau, accepted iterations grow it by 10%.
BACKTRACK_SHRINK = 0.5
BACKTRACK_GROWTH = 1.1
BACKTRACK_RATIO = 0.9
MIN_STEP = 1e-18

# Stop as stalled when the best residual has not improved by more than
# STALL_EPS (relative) for STALL_WINDOW consecutive iterations.
STALL_WINDOW = 500
STALL_EPS = 1e-12

# A path is "used" by the Wardrop check when its flow exceeds this
# fraction of its OD pair's demand.
FLOW_TOL_REL = 1e-6


@dataclass(frozen=True, eq=False)
class ViProblem:
    """Operator plus feasible polytope."""

    operator: Callable[[np.ndarray], np.ndarray]
    feasible: FeasibleSet


@dataclass(frozen=True)
class SolverConfig:
    """Extragradient settings.

    ``tau=None`` selects adaptive backtracking (recommended; it finds the
    operator's scale on its own); a float fixes the step size.
    ``initial_point=None`` starts from the even demand split.
    """

    max_iters: int = 20000
    residual_tol: float = 1e-8
    tau: float | None = None
    initial_point: object = None


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    """Solver output: the best iterate found and its diagnostics.

    ``trace`` holds the natural residual per iteration. ``n_samples`` and
    ``seed`` are filled only for sample-average solves.
    """

    flow: np.ndarray
    residual: float
    iterations: int
    path_risks: np.ndarray
    converged: bool
    trace: np.ndarray
    n_samples: int | None = None
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class WardropReport:
    """Per-OD worst gap between a used path's risk and the OD minimum."""

    satisfied: bool
    max_violation: float
    od_violations: dict


@dataclass(frozen=True)
class MonotonicityReport:
    monotone: bool
    min_eigenvalue: float


def natural_residual(prob: ViProblem, h: np.ndarray) -> float:
    """|| h - P(h - F(h)) ||; zero exactly at VI solutions."""
    h = np.asarray(h, dtype=float)
    f = np.asarray(prob.operator(h), dtype=float)
    return float(np.linalg.norm(h - project(h - f, prob.feasible)))


def solve(prob: ViProblem, config: SolverConfig = SolverConfig()) -> EquilibriumResult:
    """Run the extragradient method until the residual meets tolerance.

    Deterministic: same problem and config give the same iterates. Keeps
    and returns the best iterate seen, so a late stall cannot regress the
    answer. Raises ValueError if the operator produces non-finite values.
    """
    fs = prob.feasible
    if config.initial_point is None:
        h = uniform_split(fs)
    else:
        h = project(np.asarray(config.initial_point, dtype=float), fs)
    tau = config.tau if config.tau is not None else 1.0
    adaptive = config.tau is None

    best_flow = h
    best_res = np.inf
    trace = []
    last_gain = 0
    iterations = 0

    for it in range(1, config.max_iters + 1):
        iterations = it
        fh = np.asarray(prob.operator(h), dtype=float)
        if not np.all(np.isfinite(fh)):
            raise ValueError("cost operator returned non-finite values")
        res = float(np.linalg.norm(h - project(h - fh, fs)))
        trace.append(res)
        if res < best_res * (1.0 - STALL_EPS):
            last_gain = it
        if res < best_res:
            best_res = res
            best_flow = h
        if best_res <= config.residual_tol:
            break
        if it - last_gain >= STALL_WINDOW:
            break

        if adaptive:
            while True:
                y = project(h - tau * fh, fs)
                fy = np.asarray(prob.operator(y), dtype=float)
                gap = float(np.linalg.norm(h - y))
                if tau * float(np.linalg.norm(fh - fy)) <= BACKTRACK_RATIO * gap or gap == 0.0:
                    break
                tau *= BACKTRACK_SHRINK
                if tau < MIN_STEP:
                    break
            h = project(h - tau * fy, fs)
            tau *= BACKTRACK_GROWTH
        else:
            y = project(h - tau * fh, fs)
            fy = np.asarray(prob.operator(y), dtype=float)
            h = project(h - tau * fy, fs)

    risks = np.asarray(prob.operator(best_flow), dtype=float)
    return EquilibriumResult(
        flow=best_flow,
        residual=best_res,
        iterations=iterations,
        path_risks=risks,
        converged=bool(best_res <= config.residual_tol),
        trace=np.asarray(trace),
    )


def check_wardrop(
    spec: GameSpec,
    operator: Callable[[np.ndarray], np.ndarray],
    h: np.ndarray,
    tol: float,
) -> WardropReport:
    """Directly test the equilibrium principle at a flow.

    For each OD pair, every used path's risk must sit within ``tol`` of
    the cheapest risk over that pair's paths (used = flow above 1e-6 of
    the demand). OD pairs with zero demand are vacuously fine.
    """
    fs = FeasibleSet.from_spec(spec)
    risks = np.asarray(operator(np.asarray(h, dtype=float)), dtype=float)
    h = np.asarray(h, dtype=float)
    od_violations: dict = {}
    worst = 0.0
    for od, g, d in zip(spec.od_pairs, fs.groups, fs.demands):
        mu = float(risks[g].min())
        used = g[h[g] > FLOW_TOL_REL * float(d)]
        gap = float((risks[used] - mu).max()) if used.size else 0.0
        od_violations[od.id] = gap
        worst = max(worst, gap)
    return WardropReport(satisfied=bool(worst <= tol), max_violation=worst,
                         od_violations=od_violations)


def check_monotonicity_affine(model: object) -> MonotonicityReport:
    """Monotonicity certificate for affine operators: smallest eigenvalue
    of the symmetric part of the flow matrix (>= 0 means monotone, so the
    VI solution set is convex and extragradient is guaranteed)."""
    a = np.asarray(model.a, dtype=float)
    lam = float(np.linalg.eigvalsh((a + a.T) / 2.0).min())
    return MonotonicityReport(monotone=bool(lam >= -1e-12), min_eigenvalue=lam)
