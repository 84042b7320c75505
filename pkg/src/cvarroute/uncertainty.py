"""Compact-support uncertainty models and reproducible sampling.

Two models: an axis-aligned box with independent uniform coordinates, and
an empirical distribution over stored draws (resampled with replacement).
Sampling is deterministic given a 64-bit seed and is versioned as: numpy
``Philox`` counter-based bit generator, one ``SeedSequence(seed)`` root,
spawned into one child stream per coordinate for the box model (so column
j of the output depends only on seed and j, not on the draw count layout).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Union

import numpy as np

_SEED_MASK = (1 << 64) - 1

# Box vertex enumeration is refused above this dimension (2^m points).
MAX_VERTEX_DIM = 20

SUPPORT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class UniformBox:
    """Independent uniform coordinates on [lo_j, hi_j]."""

    lo: np.ndarray
    hi: np.ndarray

    @property
    def dim(self) -> int:
        return int(np.asarray(self.lo).size)

    def contains(self, points: np.ndarray, tol: float = SUPPORT_TOL) -> bool:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        return bool(np.all(pts >= lo - tol) and np.all(pts <= hi + tol))


@dataclass(frozen=True, eq=False)
class FiniteSamples:
    """Empirical distribution: uniform over the stored draws (rows)."""

    draws: np.ndarray

    @property
    def dim(self) -> int:
        return int(np.asarray(self.draws).shape[1])

    def contains(self, points: np.ndarray, tol: float = 0.0) -> bool:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        stored = np.asarray(self.draws, dtype=float)
        hits = (np.abs(pts[:, None, :] - stored[None, :, :]) <= tol).all(axis=2)
        return bool(hits.any(axis=1).all())


UncertaintyModel = Union[UniformBox, FiniteSamples]


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Draws from an uncertainty model together with the seed that made them."""

    draws: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return int(self.draws.shape[0])


def dimension(model: UncertaintyModel) -> int:
    return model.dim


def structural_errors(model: object) -> list[str]:
    """Shape/ordering problems of an uncertainty model, as messages."""
    errs: list[str] = []
    if isinstance(model, UniformBox):
        lo = np.asarray(model.lo, dtype=float)
        hi = np.asarray(model.hi, dtype=float)
        if lo.ndim != 1 or hi.ndim != 1 or lo.size != hi.size or lo.size == 0:
            errs.append("uncertainty: lo and hi must be 1-D vectors of equal positive length")
            return errs
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            errs.append("uncertainty: box bounds must be finite")
        elif np.any(lo > hi):
            j = int(np.argmax(lo > hi))
            errs.append(f"uncertainty: lo > hi at coordinate {j}")
    elif isinstance(model, FiniteSamples):
        draws = np.asarray(model.draws, dtype=float)
        if draws.ndim != 2 or draws.shape[0] == 0 or draws.shape[1] == 0:
            errs.append("uncertainty: draws must be a nonempty 2-D array")
        elif not np.all(np.isfinite(draws)):
            errs.append("uncertainty: draws must be finite")
    else:
        errs.append(f"uncertainty: unknown model {type(model).__name__}")
    return errs


def sample(model: UncertaintyModel, n: int, seed: int) -> SampleSet:
    """Draw ``n`` i.i.d. points from the model, reproducibly.

    Same (model, n, seed) always yields the same array; for the box model
    the first k rows of column j agree across different n as well, since
    each coordinate has its own spawned stream.
    """
    if n <= 0:
        raise ValueError(f"sample count must be positive, got {n}")
    root = np.random.SeedSequence(int(seed) & _SEED_MASK)
    if isinstance(model, UniformBox):
        lo = np.asarray(model.lo, dtype=float)
        hi = np.asarray(model.hi, dtype=float)
        cols = []
        for child, a, b in zip(root.spawn(lo.size), lo, hi):
            gen = np.random.Generator(np.random.Philox(child))
            cols.append(gen.uniform(a, b, size=n))
        draws = np.column_stack(cols)
    elif isinstance(model, FiniteSamples):
        stored = np.asarray(model.draws, dtype=float)
        gen = np.random.Generator(np.random.Philox(root))
        idx = gen.integers(0, stored.shape[0], size=n)
        draws = stored[idx]
    else:
        raise TypeError(f"unknown uncertainty model {type(model).__name__}")
    return SampleSet(draws=draws, seed=int(seed))


def support_vertices(model: UncertaintyModel) -> np.ndarray:
    """Extreme points of the support: box corners, or the stored rows.

    Box corners are enumerated only up to dimension 20 (2^20 points);
    degenerate coordinates (lo == hi) contribute a single value.
    """
    if isinstance(model, UniformBox):
        lo = np.asarray(model.lo, dtype=float)
        hi = np.asarray(model.hi, dtype=float)
        if lo.size > MAX_VERTEX_DIM:
            raise ValueError(
                f"box vertex enumeration needs 2^{lo.size} points; limit is 2^{MAX_VERTEX_DIM}")
        axes = [sorted({float(a), float(b)}) for a, b in zip(lo, hi)]
        return np.array([list(c) for c in itertools.product(*axes)])
    if isinstance(model, FiniteSamples):
        return np.asarray(model.draws, dtype=float)
    raise TypeError(f"unknown uncertainty model {type(model).__name__}")


def num_support_vertices(model: UncertaintyModel) -> int:
    """Vertex count without materializing the vertices."""
    if isinstance(model, UniformBox):
        lo = np.asarray(model.lo, dtype=float)
        hi = np.asarray(model.hi, dtype=float)
        n = 1
        for a, b in zip(lo, hi):
            n *= 2 if a != b else 1
        return n
    if isinstance(model, FiniteSamples):
        return int(np.asarray(model.draws).shape[0])
    raise TypeError(f"unknown uncertainty model {type(model).__name__}")
