"""Path-cost models and conditional value-at-risk (CVaR) of path costs.

Cost families (both affine in the flow for every fixed disturbance):

* ``AffineAdditive``   -- cost(h, u) = a h + b + cu u
* ``AffineUncertainSlope`` -- cost_p(h, u) = (a_p + d_p u) h + b_p + cu_p u

CVaR at level ``alpha`` is the expectation of the upper ``alpha`` tail. It
is computed two ways: a closed form when the uncertain part of each path
cost is a single scaled uniform coordinate, and the exactly-minimized
empirical estimate min_t { t + mean([z_i - t]_+) / alpha } for sampled
costs. A high-sample reference operator stands in where no closed form
exists; it is a labeled approximation, never ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from .uncertainty import FiniteSamples, SampleSet, UniformBox, sample

if TYPE_CHECKING:
    from .game import GameSpec

# Guard for deciding whether n*alpha sits on an integer: keeps the
# minimizer-interval detection stable against fp noise in the product.
INTEGER_TOL = 1e-9

REFERENCE_SAMPLES = 10 ** 6
REFERENCE_SEED = 987654321


@dataclass(frozen=True, eq=False)
class AffineAdditive:
    """Flow-coupled affine cost with additive uncertainty: a h + b + cu u."""

    a: np.ndarray
    b: np.ndarray
    cu: np.ndarray


@dataclass(frozen=True, eq=False)
class AffineUncertainSlope:
    """Affine cost whose slopes also shift with u.

    ``d`` stacks one |P| x m matrix per path: path p's cost is
    (a_p + d_p u) . h + b_p + cu_p . u, bilinear in (h, u).
    """

    a: np.ndarray
    b: np.ndarray
    cu: np.ndarray
    d: np.ndarray


CostModel = Union[AffineAdditive, AffineUncertainSlope]


@dataclass(frozen=True)
class CvarResult:
    """Empirical CVaR value plus the full minimizer interval of the
    underlying objective t + mean([z - t]_+) / alpha (an interval exactly
    when n*alpha is an integer, a single point otherwise)."""

    value: float
    minimizer_interval: tuple[float, float]


def _check_alpha(alpha: float) -> None:
    if not (isinstance(alpha, (int, float)) and 0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie strictly inside (0,1), got {alpha!r}")


def structural_errors(model: object, num_paths: int, udim: int | None) -> list[str]:
    """Shape problems of a cost model, as messages. ``udim`` may be None
    when the uncertainty model itself is malformed; u-facing checks are
    then skipped."""
    errs: list[str] = []
    if not isinstance(model, (AffineAdditive, AffineUncertainSlope)):
        return [f"cost: unknown model {type(model).__name__}"]
    p = num_paths
    a = np.asarray(model.a, dtype=float)
    b = np.asarray(model.b, dtype=float)
    cu = np.asarray(model.cu, dtype=float)
    if a.shape != (p, p):
        errs.append(f"cost: matrix a has shape {a.shape}, expected ({p}, {p})")
    if b.shape != (p,):
        errs.append(f"cost: offset b has shape {b.shape}, expected ({p},)")
    if cu.ndim != 2 or cu.shape[0] != p:
        errs.append(f"cost: matrix cu has shape {cu.shape}, expected ({p}, m)")
    elif udim is not None and cu.shape[1] != udim:
        errs.append(f"cost: cu has {cu.shape[1]} columns, uncertainty dimension is {udim}")
    if isinstance(model, AffineUncertainSlope):
        d = np.asarray(model.d, dtype=float)
        if d.ndim != 3 or d.shape[0] != p or d.shape[1] != p:
            errs.append(f"cost: slope stack d has shape {d.shape}, expected ({p}, {p}, m)")
        elif udim is not None and d.shape[2] != udim:
            errs.append(f"cost: d has {d.shape[2]} u-columns, uncertainty dimension is {udim}")
        elif not np.all(np.isfinite(d)):
            errs.append("cost: slope stack d must be finite")
    for name, arr in (("a", a), ("b", b), ("cu", cu)):
        if arr.size and not np.all(np.isfinite(arr)):
            errs.append(f"cost: {name} must be finite")
    return errs


def eval_cost(model: CostModel, h: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Realized path costs at flow ``h`` and disturbance ``u``."""
    h = np.asarray(h, dtype=float)
    u = np.asarray(u, dtype=float)
    if isinstance(model, AffineAdditive):
        return model.a @ h + model.b + model.cu @ u
    slopes = model.a + np.einsum("pjm,m->pj", model.d, u)
    return slopes @ h + model.b + model.cu @ u


def path_cost_samples(model: CostModel, h: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """Realized costs for every draw at once: |P| x n matrix."""
    h = np.asarray(h, dtype=float)
    draws = np.asarray(draws, dtype=float)
    additive = (model.b + model.a @ h)[:, None] + (draws @ model.cu.T).T
    if isinstance(model, AffineAdditive):
        return additive
    return additive + np.einsum("pjm,nm,j->pn", model.d, draws, h)


def uniform_cvar(lo: float, hi: float, alpha: float) -> float:
    """CVaR of U[lo, hi]: the mean of the upper alpha tail."""
    _check_alpha(alpha)
    if lo > hi:
        raise ValueError("uniform bounds out of order")
    return hi - alpha * (hi - lo) / 2.0


def empirical_cvar(values: np.ndarray, alpha: float) -> CvarResult:
    """Exactly minimize the sample CVaR objective in closed form.

    With the samples sorted descending and k = ceil(n*alpha), the minimum
    of t + sum([z_i - t]_+) / (n*alpha) is attained at t = z_(k) with value
    z_(k) + sum_{i<k}(z_(i) - z_(k)) / (n*alpha); when n*alpha is an
    integer the objective is flat on [z_(k+1), z_(k)] and that whole
    interval is reported. The value does not depend on which flat-interval
    endpoint is used, so fp noise in the integer test cannot corrupt it.
    """
    z = np.asarray(values, dtype=float).ravel()
    if z.size == 0:
        raise ValueError("empirical CVaR needs at least one sample")
    if not np.all(np.isfinite(z)):
        raise ValueError("empirical CVaR needs finite samples")
    _check_alpha(alpha)
    n = z.size
    na = n * alpha
    k = min(max(int(math.ceil(na - INTEGER_TOL)), 1), n)
    zs = np.sort(z)[::-1]
    t_star = float(zs[k - 1])
    value = t_star + float(np.sum(zs[: k - 1] - t_star)) / na
    on_integer = abs(na - round(na)) <= INTEGER_TOL * max(1.0, na)
    t_lo = float(zs[k]) if (on_integer and k < n) else t_star
    return CvarResult(value=value, minimizer_interval=(t_lo, t_star))


def _cvar_values(z_rows: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise empirical CVaR values (no intervals), vectorized."""
    z = np.asarray(z_rows, dtype=float)
    n = z.shape[1]
    na = n * alpha
    k = min(max(int(math.ceil(na - INTEGER_TOL)), 1), n)
    zs = -np.sort(-z, axis=1)
    t = zs[:, k - 1]
    return t + (zs[:, : k - 1] - t[:, None]).sum(axis=1) / na


def _exact_offsets(model: CostModel, alpha: float, model_u: object) -> np.ndarray:
    """b plus the closed-form CVaR of each path's uncertain term.

    Requires the additive model over a uniform box with at most one
    nonzero cu entry per row (a scaled uniform has a one-line CVaR; sums
    of independent uniforms do not)."""
    _check_alpha(alpha)
    if not isinstance(model, AffineAdditive):
        raise ValueError(
            "closed-form CVaR covers only the additive-uncertainty cost model; "
            "use SAA or a high-sample reference operator")
    if not isinstance(model_u, UniformBox):
        raise ValueError(
            "closed-form CVaR covers only uniform-box uncertainty; "
            "use SAA or a high-sample reference operator")
    cu = np.asarray(model.cu, dtype=float)
    lo = np.asarray(model_u.lo, dtype=float)
    hi = np.asarray(model_u.hi, dtype=float)
    offsets = np.asarray(model.b, dtype=float).copy()
    for p in range(cu.shape[0]):
        nz = np.flatnonzero(cu[p])
        if nz.size > 1:
            raise ValueError(
                f"path index {p}: cost mixes {nz.size} uncertain coordinates; no closed "
                "form exists -- use SAA or a high-sample reference operator")
        if nz.size == 1:
            j = int(nz[0])
            c = float(cu[p, j])
            ends = (c * lo[j], c * hi[j])
            offsets[p] += uniform_cvar(min(ends), max(ends), alpha)
    return offsets


def exact_cvar_affine_additive(
    model: CostModel, h: np.ndarray, alpha: float, model_u: object
) -> np.ndarray:
    """Closed-form per-path CVaR of costs at flow ``h``."""
    return np.asarray(model.a, dtype=float) @ np.asarray(h, dtype=float) \
        + _exact_offsets(model, alpha, model_u)


@dataclass(frozen=True, eq=False)
class ExactCostOperator:
    """Closed-form CVaR cost operator; affine: matrix @ h + offsets."""

    matrix: np.ndarray
    offsets: np.ndarray
    alpha: float

    def __call__(self, h: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(h, dtype=float) + self.offsets


class EmpiricalCostOperator:
    """Sample-average CVaR of path costs as a function of flow.

    For the additive model the empirical CVaR offset does not depend on
    the flow (CVaR is translation equivariant), so the operator reduces to
    a fixed affine map with a precomputed offset vector; differences
    F(h) - F(h') are then exactly a @ (h - h'). The slope model re-solves
    the empirical CVaR problem per call.
    """

    def __init__(self, model: CostModel, samples: SampleSet, alpha: float) -> None:
        _check_alpha(alpha)
        if samples.n == 0:
            raise ValueError("empirical operator needs at least one sample")
        self.model = model
        self.samples = samples
        self.alpha = float(alpha)
        if isinstance(model, AffineAdditive):
            noise = np.asarray(samples.draws, dtype=float) @ np.asarray(model.cu, dtype=float).T
            self._matrix = np.asarray(model.a, dtype=float)
            self._offsets = np.asarray(model.b, dtype=float) + _cvar_values(noise.T, self.alpha)
        else:
            self._matrix = None
            self._offsets = None

    def __call__(self, h: np.ndarray) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix @ np.asarray(h, dtype=float) + self._offsets
        z = path_cost_samples(self.model, h, self.samples.draws)
        return _cvar_values(z, self.alpha)


CostOperator = Union[ExactCostOperator, EmpiricalCostOperator]


def cvar_operator(spec: "GameSpec", samples: SampleSet | None = None) -> CostOperator:
    """Per-path CVaR of cost as an operator on flows.

    With ``samples`` the operator is the sample-average estimate built
    from exactly those draws; without, the closed form (additive model
    over a uniform box only -- anything else raises).
    """
    if samples is None:
        offsets = _exact_offsets(spec.cost_model, spec.alpha, spec.uncertainty)
        return ExactCostOperator(
            matrix=np.asarray(spec.cost_model.a, dtype=float),
            offsets=offsets,
            alpha=float(spec.alpha),
        )
    return EmpiricalCostOperator(spec.cost_model, samples, spec.alpha)


def reference_operator(
    spec: "GameSpec", n: int = REFERENCE_SAMPLES, seed: int = REFERENCE_SEED
) -> EmpiricalCostOperator:
    """High-sample stand-in for models with no closed form.

    A labeled approximation for comparisons and diagnostics; results built
    on it should say so. Deterministic: fixed documented seed.
    """
    return EmpiricalCostOperator(spec.cost_model, sample(spec.uncertainty, n, seed), spec.alpha)
