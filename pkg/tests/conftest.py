"""Shared fixtures: the bundled reference instance, its exact solution,
and seeded random-instance helpers."""

from __future__ import annotations

import time

import numpy as np
import pytest

import cvarroute as cr

# The reference instance's equilibrium as published (2 decimals) and the
# per-OD risk levels re-derived by hand before coding.
H_STAR_PUBLISHED = np.array([89.52, 98.39, 72.09, 74.32, 95.68])
RISK_OD1 = 8767.1
RISK_OD2 = 11261.7


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def random_product_polytope(gen: np.random.Generator, max_ods: int = 2,
                            max_paths: int = 4) -> cr.FeasibleSet:
    """Random small product of scaled simplices."""
    num_ods = int(gen.integers(1, max_ods + 1))
    groups = []
    start = 0
    for _ in range(num_ods):
        k = int(gen.integers(1, max_paths + 1))
        groups.append(np.arange(start, start + k))
        start += k
    demands = gen.uniform(0.5, 3.0, size=num_ods)
    return cr.FeasibleSet(groups=tuple(groups), demands=demands, num_paths=start)


def random_affine_game(gen: np.random.Generator):
    """Strongly monotone affine operator on a random small polytope:
    symmetric-positive-definite part plus a scaled skew part."""
    fs = random_product_polytope(gen, max_ods=2, max_paths=3)
    p = fs.num_paths
    m = gen.normal(size=(p, p))
    sym = m @ m.T + (0.5 + float(gen.uniform())) * np.eye(p)
    skew = gen.normal(size=(p, p))
    a = sym + (skew - skew.T) * float(gen.uniform(0.0, 2.0))
    b = gen.normal(0.0, 3.0, size=p)
    return a, b, fs


@pytest.fixture(scope="session")
def golden_spec() -> cr.GameSpec:
    return cr.load_golden_spec()


@pytest.fixture(scope="session")
def golden_fs(golden_spec) -> cr.FeasibleSet:
    return cr.FeasibleSet.from_spec(golden_spec)


@pytest.fixture(scope="session")
def golden_exact(golden_spec, golden_fs) -> cr.EquilibriumResult:
    prob = cr.ViProblem(operator=cr.cvar_operator(golden_spec), feasible=golden_fs)
    return cr.solve(prob)


@pytest.fixture(scope="session")
def desk_experiment(golden_spec):
    """Full desk-scale consistency study, with its wall time in seconds."""
    config = cr.ExperimentConfig(spec=golden_spec, sample_sizes=(50, 500, 5000),
                                 runs_per_size=100, base_seed=1)
    t0 = time.perf_counter()
    result = cr.run_experiment(config)
    return result, time.perf_counter() - t0
