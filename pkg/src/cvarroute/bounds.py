"""Calculators for the finite-sample convergence guarantees.

Everything here evaluates closed-form constants: bounds on realized path
costs over the feasible polytope and uncertainty support, the induced
Lipschitz constant of the risk operator, covering numbers of the polytope,
the exponential concentration constants, the pointwise CVaR deviation
bound, and the sample count sufficient for a target confidence. A Monte
Carlo harness checks the pointwise bound against observed frequencies.

Overflowing covering numbers are reported as +inf, never wrapped; sizes
that would make vertex enumeration explode fall back to random sampling
with the result flagged as an estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import (
    AffineAdditive,
    exact_cvar_affine_additive,
    path_cost_samples,
    _cvar_values,
)
from .game import FeasibleSet, GameSpec, diameter, feasible_vertices, num_vertices, sample_feasible
from .uncertainty import (
    UniformBox,
    dimension,
    num_support_vertices,
    sample,
    support_vertices,
)

VERTEX_CAP = 10 ** 6
FALLBACK_SAMPLES = 10 ** 5
FALLBACK_SEED = 24680
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class CostBounds:
    """Extremes of realized path cost; ``exact`` is False when the values
    come from random sampling instead of vertex enumeration."""

    low: float
    high: float
    exact: bool


@dataclass(frozen=True, eq=False)
class BoundsReport:
    """Instance constants every guarantee formula is built from."""

    alpha: float
    num_paths: int
    cost_low: float
    cost_high: float
    cost_bounds_exact: bool
    lipschitz: float
    diameter: float
    phi_low: float
    phi_high: float


@dataclass(frozen=True, eq=False)
class ConcentrationReport:
    """Observed pointwise CVaR deviation frequencies vs the bound."""

    epsilon: float
    n: int
    trials: int
    bound: float
    slack: float
    frequencies: dict
    max_frequency: float
    passed: bool


def _paired_cost_samples(model, flows: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """Realized costs pairing flow i with draw i; rows are sample points."""
    base = flows @ np.asarray(model.a, dtype=float).T + np.asarray(model.b, dtype=float) \
        + draws @ np.asarray(model.cu, dtype=float).T
    if isinstance(model, AffineAdditive):
        return base
    return base + np.einsum("pjm,nm,nj->np", np.asarray(model.d, dtype=float), draws, flows)


def compute_cost_bounds(
    spec: GameSpec,
    vertex_cap: int = VERTEX_CAP,
    fallback_samples: int = FALLBACK_SAMPLES,
    fallback_seed: int = FALLBACK_SEED,
) -> CostBounds:
    """Min and max realized path cost over feasible flows and the support.

    Costs are affine in the flow for fixed disturbance and affine in the
    disturbance for fixed flow, so the extremes are attained on vertices
    of polytope x support; those are enumerated exactly up to
    ``vertex_cap`` combinations. Beyond the cap (or for boxes above
    dimension 20) the result is a sampled estimate, flagged as such.
    """
    fs = FeasibleSet.from_spec(spec)
    model = spec.cost_model
    box_too_big = isinstance(spec.uncertainty, UniformBox) and dimension(spec.uncertainty) > 20
    if not box_too_big and num_vertices(fs) * num_support_vertices(spec.uncertainty) <= vertex_cap:
        uverts = support_vertices(spec.uncertainty)
        low = math.inf
        high = -math.inf
        for v in feasible_vertices(fs):
            z = path_cost_samples(model, v, uverts)
            low = min(low, float(z.min()))
            high = max(high, float(z.max()))
        return CostBounds(low=low, high=high, exact=True)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(fallback_seed)))
    flows = sample_feasible(fs, fallback_samples, rng)
    draws = sample(spec.uncertainty, fallback_samples, fallback_seed).draws
    z = _paired_cost_samples(model, flows, draws)
    return CostBounds(low=float(z.min()), high=float(z.max()), exact=False)


def phi_bounds(cost_low: float, cost_high: float, alpha: float) -> tuple[float, float]:
    """Range of the scalar risk objective: [m, m + (M - m)/alpha]."""
    if cost_high < cost_low:
        raise ValueError("cost bounds out of order")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0,1), got {alpha!r}")
    return float(cost_low), float(cost_low + (cost_high - cost_low) / alpha)


def compute_lipschitz(model, uncertainty=None) -> float:
    """Lipschitz constant of realized cost in the flow, uniform over the
    support: the worst Euclidean row norm of the (possibly u-shifted)
    flow matrix. The slope model needs the uncertainty model to supply
    support vertices."""
    a = np.asarray(model.a, dtype=float)
    if isinstance(model, AffineAdditive):
        return float(np.sqrt((a * a).sum(axis=1)).max())
    if uncertainty is None:
        raise ValueError("slope model needs the uncertainty model to bound its rows")
    worst = 0.0
    for v in support_vertices(uncertainty):
        rows = a + np.einsum("pjm,m->pj", np.asarray(model.d, dtype=float), v)
        worst = max(worst, float(np.sqrt((rows * rows).sum(axis=1)).max()))
    return worst


def _log_covering_number(
    lipschitz: float, diam: float, alpha: float, epsilon: float, num_paths: int
) -> float:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0,1), got {alpha!r}")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if num_paths < 1:
        raise ValueError("num_paths must be at least 1")
    if lipschitz <= 0.0 or diam <= 0.0:
        raise ValueError("lipschitz and diameter must be positive")
    p = num_paths
    return (
        math.lgamma(math.ceil(p / 2.0) + 1.0)
        - math.log(2.0)
        - (p / 2.0) * math.log(math.pi)
        + p * math.log(12.0 * lipschitz * diam / (epsilon * alpha))
    )


def covering_number(
    lipschitz: float, diam: float, alpha: float, epsilon: float, num_paths: int
) -> float:
    """Balls of radius epsilon*alpha/(6L) needed to cover the polytope:
    ceil(|P|/2)! / (2 pi^{|P|/2}) * (12 L diam / (epsilon alpha))^{|P|}.
    Overflow is reported as +inf."""
    logk = _log_covering_number(lipschitz, diam, alpha, epsilon, num_paths)
    try:
        return math.exp(logk)
    except OverflowError:
        return math.inf


def exponential_constants(
    lipschitz: float,
    diam: float,
    alpha: float,
    epsilon: float,
    num_paths: int,
    cost_low: float,
    cost_high: float,
) -> tuple[float, float]:
    """(gamma, beta) of the uniform deviation bound gamma * exp(-beta n):
    gamma = 6 |P| K(epsilon), beta = alpha epsilon^2 / (44 |P| (M-m)^2)."""
    if cost_high <= cost_low:
        raise ValueError("cost range must be positive (cost_high > cost_low)")
    k = covering_number(lipschitz, diam, alpha, epsilon, num_paths)
    gamma = 6.0 * num_paths * k
    beta = alpha * epsilon ** 2 / (44.0 * num_paths * (cost_high - cost_low) ** 2)
    return gamma, beta


def pointwise_concentration(
    alpha: float, epsilon: float, cost_low: float, cost_high: float, n: int
) -> float:
    """Probability bound for one path's empirical CVaR missing its exact
    value by more than epsilon: min(1, 6 exp(-alpha eps^2 n / (11 (M-m)^2)))."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0,1), got {alpha!r}")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if cost_high <= cost_low:
        raise ValueError("cost range must be positive (cost_high > cost_low)")
    if n < 1:
        raise ValueError("n must be at least 1")
    expo = -alpha * epsilon ** 2 * n / (11.0 * (cost_high - cost_low) ** 2)
    return min(1.0, 6.0 * math.exp(expo))


def sample_complexity(
    zeta: float,
    delta: float,
    lipschitz: float,
    diam: float,
    alpha: float,
    num_paths: int,
    cost_low: float,
    cost_high: float,
) -> int:
    """Smallest n with gamma(delta) * exp(-beta(delta) n) <= zeta.

    Evaluated in log space so astronomical covering numbers stay finite:
    n = (1/beta) * (log gamma - log zeta), rounded up. Raises when the
    requirement is vacuous (gamma <= zeta already).
    """
    if not 0.0 < zeta < 1.0:
        raise ValueError("zeta must lie strictly inside (0,1)")
    if cost_high <= cost_low:
        raise ValueError("cost range must be positive (cost_high > cost_low)")
    log_gamma = math.log(6.0 * num_paths) + _log_covering_number(
        lipschitz, diam, alpha, delta, num_paths)
    beta = alpha * delta ** 2 / (44.0 * num_paths * (cost_high - cost_low) ** 2)
    need = (log_gamma - math.log(zeta)) / beta
    if need <= 0.0:
        raise ValueError(
            "confidence target is met by any sample size (gamma <= zeta); nothing to solve")
    return int(math.ceil(need))


def bounds_report(spec: GameSpec) -> BoundsReport:
    """Assemble every instance constant the guarantees depend on."""
    fs = FeasibleSet.from_spec(spec)
    cb = compute_cost_bounds(spec)
    lip = compute_lipschitz(spec.cost_model, spec.uncertainty)
    phi_lo, phi_hi = phi_bounds(cb.low, cb.high, spec.alpha)
    return BoundsReport(
        alpha=float(spec.alpha),
        num_paths=spec.num_paths,
        cost_low=cb.low,
        cost_high=cb.high,
        cost_bounds_exact=cb.exact,
        lipschitz=lip,
        diameter=diameter(fs),
        phi_low=phi_lo,
        phi_high=phi_hi,
    )


def empirical_concentration_check(
    spec: GameSpec,
    h: np.ndarray,
    epsilon: float,
    n: int,
    trials: int,
    alpha: float | None = None,
    base_seed: int = 0,
) -> ConcentrationReport:
    """Measure how often the n-sample CVaR of each path's cost at flow
    ``h`` strays more than epsilon from the closed form, across seeded
    trials, and compare the worst path against the theoretical bound
    (plus three-sigma binomial slack for the finite trial count).

    Needs the closed form, so the spec must be additive over a uniform
    box. Trials are independent and draw their seeds from ``base_seed``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    a = spec.alpha if alpha is None else alpha
    exact = exact_cvar_affine_additive(spec.cost_model, h, a, spec.uncertainty)
    cb = compute_cost_bounds(spec)
    bound = pointwise_concentration(a, epsilon, cb.low, cb.high, n)
    exceed = np.zeros(spec.num_paths)
    for t in range(trials):
        seed = int(np.random.SeedSequence((base_seed & _SEED_MASK, t)).generate_state(1, np.uint64)[0])
        draws = sample(spec.uncertainty, n, seed).draws
        est = _cvar_values(path_cost_samples(spec.cost_model, h, draws), a)
        exceed += (np.abs(est - exact) > epsilon).astype(float)
    freq = exceed / trials
    slack = 3.0 * math.sqrt(bound * (1.0 - bound) / trials)
    worst = float(freq.max())
    return ConcentrationReport(
        epsilon=float(epsilon),
        n=int(n),
        trials=int(trials),
        bound=bound,
        slack=slack,
        frequencies={pid: float(f) for pid, f in zip(spec.path_ids, freq)},
        max_frequency=worst,
        passed=bool(worst <= bound + slack),
    )
