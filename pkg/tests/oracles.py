"""Independent brute-force oracles the fast implementations are tested
against: grid minimization for the empirical risk objective, active-set
enumeration for projection, and support enumeration for equilibria.

Everything here trades speed for obviousness on purpose; none of it
shares code with the package.
"""

from __future__ import annotations

import itertools

import numpy as np


def cvar_objective(z: np.ndarray, alpha: float, t: np.ndarray) -> np.ndarray:
    """t + mean(max(z - t, 0)) / alpha, vectorized over t."""
    z = np.asarray(z, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    excess = np.clip(z[None, :] - t[:, None], 0.0, None)
    return t + excess.mean(axis=1) / alpha


def cvar_grid_min(z: np.ndarray, alpha: float, grid_points: int = 100_001) -> tuple[float, float]:
    """(grid minimum value, grid step) over [min z, max z]."""
    z = np.asarray(z, dtype=float)
    lo, hi = float(z.min()), float(z.max())
    if lo == hi:
        return lo, 0.0
    ts = np.linspace(lo, hi, grid_points)
    vals = cvar_objective(z, alpha, ts)
    return float(vals.min()), float(ts[1] - ts[0])


def project_simplex_qp(x: np.ndarray, total: float) -> np.ndarray:
    """Projection onto {y >= 0, sum y = total} by trying every support.

    For support S the equality-constrained minimizer is y_S = x_S - theta
    with theta = (sum x_S - total)/|S|; it is the true projection when
    y_S >= 0 and every excluded coordinate satisfies x_i <= theta.
    """
    x = np.asarray(x, dtype=float)
    if total <= 0.0:
        return np.zeros_like(x)
    n = x.size
    best = None
    for mask in range(1, 1 << n):
        s = [i for i in range(n) if mask >> i & 1]
        theta = (x[s].sum() - total) / len(s)
        y_s = x[s] - theta
        if np.any(y_s < -1e-12):
            continue
        out = [i for i in range(n) if not (mask >> i & 1)]
        if any(x[i] > theta + 1e-12 for i in out):
            continue
        y = np.zeros(n)
        y[s] = np.maximum(y_s, 0.0)
        cand = float(np.sum((y - x) ** 2))
        if best is None or cand < best[0] - 1e-15:
            best = (cand, y)
    assert best is not None, "no KKT support found"
    return best[1]


def project_oracle(x: np.ndarray, groups, demands) -> np.ndarray:
    """Blockwise QP projection onto the product of scaled simplices."""
    x = np.asarray(x, dtype=float)
    y = np.zeros_like(x)
    for g, d in zip(groups, demands):
        y[np.asarray(g)] = project_simplex_qp(x[np.asarray(g)], float(d))
    return y


def vi_support_oracle(a: np.ndarray, b: np.ndarray, groups, demands) -> list[np.ndarray]:
    """All equilibria of the affine game by support enumeration.

    For every choice of used paths (nonempty per positive-demand OD),
    solve the linear system "used paths share their OD's cost level, flows
    meet demand", then keep solutions with nonnegative flows whose unused
    paths are no cheaper than the level. Distinct flows are deduplicated.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    groups = [np.asarray(g, dtype=int) for g in groups]
    num_paths = a.shape[0]
    num_ods = len(groups)

    per_od_supports = []
    for g, d in zip(groups, demands):
        if d > 0:
            subsets = []
            for r in range(1, len(g) + 1):
                subsets.extend(itertools.combinations(g.tolist(), r))
            per_od_supports.append(subsets)
        else:
            per_od_supports.append([()])

    solutions: list[np.ndarray] = []
    for combo in itertools.product(*per_od_supports):
        support = [p for s in combo for p in s]
        od_of = {}
        for w, s in enumerate(combo):
            for p in s:
                od_of[p] = w
        k = len(support)
        size = k + num_ods
        mat = np.zeros((size, size))
        rhs = np.zeros(size)
        for row, p in enumerate(support):
            mat[row, :k] = a[p, support]
            mat[row, k + od_of[p]] = -1.0
            rhs[row] = -b[p]
        for w, (s, d) in enumerate(zip(combo, demands)):
            row = k + w
            for col, p in enumerate(support):
                if p in s:
                    mat[row, col] = 1.0
            rhs[row] = float(d)
        try:
            sol = np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError:
            continue
        h = np.zeros(num_paths)
        h[support] = sol[:k]
        mu = sol[k:]
        if np.any(h[support] < -1e-9):
            continue
        risks = a @ h + b
        ok = True
        for w, g in enumerate(groups):
            if demands[w] <= 0:
                continue
            for p in g.tolist():
                if p not in support and risks[p] < mu[w] - 1e-7:
                    ok = False
        if not ok:
            continue
        if not any(np.linalg.norm(h - prev) < 1e-7 for prev in solutions):
            solutions.append(h)
    return solutions
