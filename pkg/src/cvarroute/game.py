"""Routing-game structure and the feasible-flow polytope.

A game routes the demand of each origin-destination (OD) pair over that
pair's paths. A flow is a plain 1-D float array indexed by position in
``GameSpec.paths``; the feasible set is a product of demand-scaled
simplices, one block per OD pair. This module owns the structural
invariants, exact Euclidean projection onto the product, and the polytope
geometry (diameter, vertices) that the guarantee calculators need.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import costs as _costs
from . import uncertainty as _uncertainty

# Feasibility tolerances: demand equality is checked to 1e-9 absolute,
# nonnegativity to 1e-12 (projection output satisfies both).
DEMAND_TOL = 1e-9
NONNEG_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ODPair:
    """One origin-destination pair with a fixed nonnegative demand."""

    id: str
    demand: float


@dataclass(frozen=True, eq=False)
class PathDef:
    """One routing alternative; ``od`` names the OD pair it serves."""

    id: str
    od: str


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Complete description of a routing game with uncertain path costs.

    Construction is permissive: all invariants are checked by
    :func:`validate_spec`, which returns violations as messages instead of
    raising, so a malformed document can be diagnosed in one pass. The
    position of a path in ``paths`` is its index in every flow vector.
    """

    od_pairs: tuple[ODPair, ...]
    paths: tuple[PathDef, ...]
    cost_model: object
    uncertainty: object
    alpha: float

    @property
    def num_paths(self) -> int:
        return len(self.paths)

    @property
    def path_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.paths)


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Product of scaled simplices: per OD pair, its paths' flows sum to
    the demand and are nonnegative.

    ``groups[w]`` holds the flow indices of OD pair ``w``; the groups must
    partition ``range(num_paths)``. Arrays are treated as immutable.
    """

    groups: tuple[np.ndarray, ...]
    demands: np.ndarray
    num_paths: int

    def __post_init__(self) -> None:
        seen = np.concatenate([np.asarray(g, dtype=int) for g in self.groups]) \
            if self.groups else np.empty(0, dtype=int)
        if len(self.groups) != len(self.demands):
            raise ValueError("one demand per index group required")
        if sorted(seen.tolist()) != list(range(self.num_paths)):
            raise ValueError("index groups must partition the path indices")
        if np.any(np.asarray(self.demands) < 0):
            raise ValueError("demands must be nonnegative")

    @classmethod
    def from_spec(cls, spec: GameSpec) -> "FeasibleSet":
        by_od = {od.id: [] for od in spec.od_pairs}
        for j, p in enumerate(spec.paths):
            by_od[p.od].append(j)
        groups = tuple(np.array(by_od[od.id], dtype=int) for od in spec.od_pairs)
        demands = np.array([od.demand for od in spec.od_pairs], dtype=float)
        return cls(groups=groups, demands=demands, num_paths=len(spec.paths))


def validate_spec(spec: GameSpec) -> list[str]:
    """Check every structural invariant; return all violations found.

    An empty list means the spec is well formed. Messages name the
    offending OD pair / path / field so CLI errors are actionable.
    """
    errs: list[str] = []
    od_ids = [od.id for od in spec.od_pairs]
    for dup in _duplicates(od_ids):
        errs.append(f"duplicate od_pair id '{dup}'")
    for od in spec.od_pairs:
        if not math.isfinite(od.demand) or od.demand < 0:
            errs.append(f"od_pair '{od.id}': demand must be finite and nonnegative, got {od.demand}")
    path_ids = [p.id for p in spec.paths]
    for dup in _duplicates(path_ids):
        errs.append(f"duplicate path id '{dup}'")
    known = set(od_ids)
    for p in spec.paths:
        if p.od not in known:
            errs.append(f"path '{p.id}': unknown od_pair '{p.od}'")
    with_paths = {p.od for p in spec.paths}
    for od in spec.od_pairs:
        if od.id not in with_paths:
            errs.append(f"od_pair '{od.id}': no paths")
    if not (isinstance(spec.alpha, (int, float)) and 0.0 < spec.alpha < 1.0):
        errs.append(f"alpha not in (0,1): got {spec.alpha!r}")

    errs.extend(_uncertainty.structural_errors(spec.uncertainty))
    m = None
    if not _uncertainty.structural_errors(spec.uncertainty):
        m = _uncertainty.dimension(spec.uncertainty)
    errs.extend(_costs.structural_errors(spec.cost_model, len(spec.paths), m))

    if errs:
        return errs

    # Structure is sound; now check cost nonnegativity over the extreme
    # points of flow polytope x uncertainty support (costs are affine or
    # bilinear, so extremes are attained at vertices).
    from . import bounds as _bounds

    cb = _bounds.compute_cost_bounds(spec)
    if cb.low < -1e-9:
        note = "" if cb.exact else " (sampled estimate)"
        errs.append(f"cost can be negative: min cost ~= {cb.low:.6g}{note}")
    return errs


def is_feasible(h: np.ndarray, fs: FeasibleSet) -> tuple[bool, float]:
    """Return (feasible, worst violation) for a flow vector.

    Violation is the max over per-OD demand mismatch (tolerance 1e-9) and
    negativity (tolerance 1e-12), reported on its own scale.
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (fs.num_paths,):
        raise ValueError(f"flow has shape {h.shape}, expected ({fs.num_paths},)")
    neg = max(0.0, float(-(h.min()))) if h.size else 0.0
    mismatch = 0.0
    ok = neg <= NONNEG_TOL
    for g, d in zip(fs.groups, fs.demands):
        mismatch = max(mismatch, abs(float(h[g].sum()) - float(d)))
    ok = ok and mismatch <= DEMAND_TOL
    return ok, max(mismatch, neg)


def _project_simplex(x: np.ndarray, total: float) -> np.ndarray:
    """Exact Euclidean projection of x onto {y >= 0, sum y = total}."""
    if total <= 0.0:
        return np.zeros_like(x)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, x.size + 1)
    rho = int(np.count_nonzero(u - css / idx > 0.0))
    theta = css[rho - 1] / rho
    return np.maximum(x - theta, 0.0)


def project(x: np.ndarray, fs: FeasibleSet) -> np.ndarray:
    """Euclidean projection onto the feasible polytope.

    Decomposes per OD pair (the blocks are separable) and uses the exact
    sort-based simplex projection within each block. A point that is
    already feasible within tolerance is returned unchanged, which makes
    the map exactly idempotent.
    """
    x = np.asarray(x, dtype=float)
    ok, _ = is_feasible(x, fs)
    if ok:
        return x
    out = np.empty_like(x)
    for g, d in zip(fs.groups, fs.demands):
        out[g] = _project_simplex(x[g], float(d))
    return out


def uniform_split(fs: FeasibleSet) -> np.ndarray:
    """Feasible starting flow: each OD pair's demand split evenly."""
    h = np.zeros(fs.num_paths)
    for g, d in zip(fs.groups, fs.demands):
        h[g] = float(d) / len(g)
    return h


def diameter(fs: FeasibleSet) -> float:
    """Euclidean diameter of the feasible polytope.

    Per OD pair the scaled simplex has diameter d*sqrt(2) between two
    vertices when it has at least two paths, and is a point otherwise;
    blocks are orthogonal so squared diameters add.
    """
    total = 0.0
    for g, d in zip(fs.groups, fs.demands):
        if len(g) >= 2:
            total += 2.0 * float(d) ** 2
    return math.sqrt(total)


def num_vertices(fs: FeasibleSet) -> int:
    """Number of extreme points (one active path per OD with demand > 0)."""
    n = 1
    for g, d in zip(fs.groups, fs.demands):
        n *= len(g) if d > 0 else 1
    return n


def feasible_vertices(fs: FeasibleSet) -> Iterator[np.ndarray]:
    """Yield every extreme point of the polytope."""
    choices = []
    for g, d in zip(fs.groups, fs.demands):
        if d > 0:
            choices.append([(int(j), float(d)) for j in g])
        else:
            choices.append([(int(g[0]), 0.0)])
    for combo in itertools.product(*choices):
        v = np.zeros(fs.num_paths)
        for j, d in combo:
            v[j] = d
        yield v


def sample_feasible(fs: FeasibleSet, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw flows uniformly on the polytope (per-OD flat Dirichlet)."""
    out = np.zeros((size, fs.num_paths))
    for g, d in zip(fs.groups, fs.demands):
        if d > 0:
            e = rng.standard_exponential((size, len(g)))
            out[:, g] = float(d) * e / e.sum(axis=1, keepdims=True)
    return out


def _duplicates(items: list[str]) -> list[str]:
    seen: set[str] = set()
    dups: list[str] = []
    for it in items:
        if it in seen and it not in dups:
            dups.append(it)
        seen.add(it)
    return dups
