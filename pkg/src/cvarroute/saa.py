"""Sample-average approximation (SAA) of the equilibrium and the seeded
consistency experiment around it.

One run: draw n disturbances, build the empirical risk operator from
exactly those draws, solve the VI, measure the distance to a reference
equilibrium. The experiment repeats this over a grid of sample sizes with
per-run seeds derived from a base seed, and aggregates distances into
quantiles and empirical CDFs. Runs are embarrassingly parallel; records
are keyed by (n, run) so results are identical at any worker count.

This module emits delimited data (CSV/JSON) only; rendering lives with
the command-line layer.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import weakref
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costs import cvar_operator
from .equilibrium import EquilibriumResult, SolverConfig, ViProblem, solve
from .game import FeasibleSet, GameSpec
from .uncertainty import SampleSet, sample

_SEED_MASK = (1 << 64) - 1

QUANTILE_LEVELS = (25, 50, 75, 95)


class ExperimentError(RuntimeError):
    """Raised when a sample size exceeds the allowed solver-failure rate.

    Carries ``failures`` (per-size counts) and ``result`` (the aggregate
    built from what did converge) for diagnostics.
    """

    def __init__(self, message: str, failures: dict, result: "ExperimentResult") -> None:
        super().__init__(message)
        self.failures = failures
        self.result = result


def derive_run_seed(base_seed: int, n: int, run: int) -> int:
    """Stable per-run seed: every (base, n, run) triple gets its own
    64-bit stream key, so runs never share draws and any run can be
    reproduced in isolation."""
    ss = np.random.SeedSequence((int(base_seed) & _SEED_MASK, int(n), int(run)))
    return int(ss.generate_state(1, np.uint64)[0])


def solve_saa(spec: GameSpec, samples: SampleSet, config: SolverConfig = SolverConfig()) -> EquilibriumResult:
    """Equilibrium of the sampled game, tagged with its draw count and seed."""
    op = cvar_operator(spec, samples)
    res = solve(ViProblem(operator=op, feasible=FeasibleSet.from_spec(spec)), config)
    return dataclasses.replace(res, n_samples=samples.n, seed=samples.seed)


_REFERENCE_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def exact_reference(spec: GameSpec, config: SolverConfig = SolverConfig()) -> np.ndarray:
    """Closed-form-operator equilibrium, solved once per spec and cached."""
    key = (config.max_iters, config.residual_tol, config.tau)
    hit = _REFERENCE_CACHE.get(spec)
    if hit is not None and hit[0] == key:
        return hit[1]
    res = solve(ViProblem(operator=cvar_operator(spec), feasible=FeasibleSet.from_spec(spec)), config)
    _REFERENCE_CACHE[spec] = (key, res.flow)
    return res.flow


def distance_to_reference(
    h: np.ndarray,
    reference: np.ndarray | None = None,
    spec: GameSpec | None = None,
    config: SolverConfig = SolverConfig(),
) -> float:
    """Euclidean distance from ``h`` to a reference flow; with no explicit
    reference the spec's exact equilibrium is used (and cached)."""
    if reference is None:
        if spec is None:
            raise ValueError("need an explicit reference flow or a spec to solve exactly")
        reference = exact_reference(spec, config)
    return float(np.linalg.norm(np.asarray(h, dtype=float) - np.asarray(reference, dtype=float)))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Consistency-experiment settings.

    ``reference=None`` measures distances to the exact equilibrium (solved
    once); pass a flow vector to measure against something else, e.g. a
    published solution. ``max_failure_fraction`` is the per-size solver
    failure rate beyond which the experiment is considered invalid.
    """

    spec: GameSpec
    sample_sizes: tuple[int, ...]
    runs_per_size: int
    base_seed: int
    solver: SolverConfig = SolverConfig()
    reference: object = None
    max_failure_fraction: float = 0.10


@dataclass(frozen=True)
class RunRecord:
    n: int
    run: int
    seed: int
    distance: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """All run records plus per-size aggregates over converged runs."""

    records: tuple[RunRecord, ...]
    distances: dict
    quantiles: dict
    failures: dict
    reference: np.ndarray
    sample_sizes: tuple[int, ...]
    runs_per_size: int
    base_seed: int

    def summary(self) -> dict:
        """JSON-ready aggregate: quantiles per size, failure counts, and
        the stochastic-dominance verdict across increasing sample sizes."""
        sizes = sorted(self.sample_sizes)
        nonincreasing = {}
        for q in ("q25", "q50", "q75"):
            vals = [self.quantiles[n][q] for n in sizes]
            nonincreasing[q] = bool(all(b <= a for a, b in zip(vals, vals[1:])))
        medians = [self.quantiles[n]["q50"] for n in sizes]
        median_improves = bool(len(medians) < 2 or medians[-1] < medians[0])
        return {
            "sample_sizes": list(self.sample_sizes),
            "runs_per_size": self.runs_per_size,
            "base_seed": self.base_seed,
            "quantiles": {str(n): dict(self.quantiles[n]) for n in sizes},
            "failures": {str(n): int(self.failures[n]) for n in sizes},
            "quantiles_nonincreasing": nonincreasing,
            "median_strictly_improves": median_improves,
            "dominance_satisfied": bool(all(nonincreasing.values()) and median_improves),
        }


def _run_one(task: tuple) -> RunRecord:
    spec, n, run, base_seed, solver, reference = task
    seed = derive_run_seed(base_seed, n, run)
    res = solve_saa(spec, sample(spec.uncertainty, n, seed), solver)
    dist = float(np.linalg.norm(res.flow - reference))
    return RunRecord(n=n, run=run, seed=seed, distance=dist,
                     iterations=res.iterations, converged=res.converged)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Execute the full grid of seeded runs and aggregate.

    Deterministic for a fixed config at any ``jobs``. Raises
    ExperimentError when any sample size's failure rate exceeds the
    configured maximum (the partial aggregate rides on the exception).
    """
    sizes = tuple(int(n) for n in config.sample_sizes)
    if len(sizes) == 0 or any(n <= 0 for n in sizes):
        raise ValueError("sample sizes must be positive")
    if len(set(sizes)) != len(sizes):
        raise ValueError("duplicate sample size")
    if config.runs_per_size < 1:
        raise ValueError("runs_per_size must be at least 1")

    if config.reference is None:
        reference = exact_reference(config.spec, config.solver)
    else:
        reference = np.asarray(config.reference, dtype=float)

    tasks = [
        (config.spec, n, run, config.base_seed, config.solver, reference)
        for n in sizes
        for run in range(config.runs_per_size)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_run_one(t) for t in tasks]
    records.sort(key=lambda r: (r.n, r.run))

    distances = {}
    quantiles = {}
    failures = {}
    for n in sizes:
        good = np.array(sorted(r.distance for r in records if r.n == n and r.converged))
        distances[n] = good
        failures[n] = sum(1 for r in records if r.n == n and not r.converged)
        if good.size:
            qs = np.percentile(good, QUANTILE_LEVELS)
            quantiles[n] = {f"q{lvl}": float(v) for lvl, v in zip(QUANTILE_LEVELS, qs)}
        else:
            quantiles[n] = {f"q{lvl}": float("nan") for lvl in QUANTILE_LEVELS}

    result = ExperimentResult(
        records=tuple(records),
        distances=distances,
        quantiles=quantiles,
        failures=failures,
        reference=reference,
        sample_sizes=sizes,
        runs_per_size=config.runs_per_size,
        base_seed=config.base_seed,
    )
    limit = config.max_failure_fraction * config.runs_per_size
    bad = {n: c for n, c in failures.items() if c > limit}
    if bad:
        raise ExperimentError(
            f"solver failure rate above {config.max_failure_fraction:.0%} for sizes {sorted(bad)}: {bad}",
            failures=failures,
            result=result,
        )
    return result


def empirical_cdf(distances: np.ndarray) -> np.ndarray:
    """Step-function support: rows (x, fraction <= x), ties merged."""
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        return np.empty((0, 2))
    xs, counts = np.unique(d, return_counts=True)
    fr = np.cumsum(counts) / d.size
    return np.column_stack([xs, fr])


def write_runs_csv(result: ExperimentResult, path: str | Path) -> None:
    """One row per run: n, run, seed, distance, iterations, converged."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "run", "seed", "distance", "iterations", "converged"])
        for r in result.records:
            w.writerow([r.n, r.run, r.seed, repr(r.distance), r.iterations,
                        "true" if r.converged else "false"])


def write_cdf_csv(cdf: np.ndarray, path: str | Path) -> None:
    """CDF support points as two columns x, F."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "F"])
        for x, f in np.asarray(cdf, dtype=float):
            w.writerow([repr(float(x)), repr(float(f))])


def write_summary_json(result: ExperimentResult, path: str | Path, extra: dict | None = None) -> None:
    """Aggregate summary as deterministic JSON (sorted keys, no clock)."""
    doc = result.summary()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
