"""Cost evaluation, exact and empirical CVaR, and the risk operators."""

from __future__ import annotations

import numpy as np
import pytest

import cvarroute as cr
from conftest import H_STAR_PUBLISHED, rng
from oracles import cvar_grid_min, cvar_objective

def _equal_risk_solution() -> np.ndarray:
    """Every path carries flow at the reference equilibrium, so it solves
    the linear system 'equal CVaR within each OD pair + demand balance'.
    Solving that directly yields machine precision, far beyond the
    published two-decimal rounding."""
    spec = cr.load_golden_spec()
    fs = cr.FeasibleSet.from_spec(spec)
    off = cr.exact_cvar_affine_additive(
        spec.cost_model, np.zeros(spec.num_paths), spec.alpha, spec.uncertainty)
    p, w = spec.num_paths, len(fs.groups)
    m = np.zeros((p + w, p + w))
    rhs = np.zeros(p + w)
    m[:p, :p] = spec.cost_model.a
    rhs[:p] = -off
    for k, grp in enumerate(fs.groups):
        m[grp, p + k] = -1.0
        m[p + k, grp] = 1.0
        rhs[p + k] = fs.demands[k]
    return np.linalg.solve(m, rhs)[:p]


# Exact equilibrium re-derived from the equal-risk linear system (more
# digits than the published rounding).
H_EXACT = _equal_risk_solution()


# ---------------------------------------------------------------------------
# realized costs
# ---------------------------------------------------------------------------


def test_eval_cost_golden_at_published_flow(golden_spec):
    c0 = cr.eval_cost(golden_spec.cost_model, H_STAR_PUBLISHED, np.zeros(2))
    assert c0 == pytest.approx([6067.2, 8767.0, 8767.2, 7661.76, 11261.56], abs=1e-9)
    c1 = cr.eval_cost(golden_spec.cost_model, H_STAR_PUBLISHED, np.ones(2))
    assert c1 - c0 == pytest.approx([3000.0, 0.0, 0.0, 4000.0, 0.0], abs=1e-9)


def test_path_cost_samples_matches_pointwise(golden_spec):
    gen = rng(3)
    draws = gen.uniform(0.0, 1.0, size=(17, 2))
    h = np.array([50.0, 110.0, 100.0, 70.0, 100.0])
    z = cr.path_cost_samples(golden_spec.cost_model, h, draws)
    for i in range(17):
        assert z[:, i] == pytest.approx(cr.eval_cost(golden_spec.cost_model, h, draws[i]))


def test_slope_model_eval():
    model = cr.AffineUncertainSlope(
        a=np.array([[1.0, 0.0], [0.0, 2.0]]),
        b=np.array([0.0, 1.0]),
        cu=np.array([[0.5], [0.0]]),
        d=np.array([[[1.0], [0.0]], [[0.0], [3.0]]]),
    )
    h = np.array([2.0, 5.0])
    u = np.array([4.0])
    # path 0: (1 + 4)*2 + 0.5*4 = 12; path 1: (2 + 12)*5 + 1 = 71
    assert cr.eval_cost(model, h, u) == pytest.approx([12.0, 71.0])
    z = cr.path_cost_samples(model, h, np.array([[4.0], [0.0]]))
    assert z[:, 0] == pytest.approx([12.0, 71.0])
    assert z[:, 1] == pytest.approx([2.0, 11.0])


# ---------------------------------------------------------------------------
# closed-form CVaR
# ---------------------------------------------------------------------------


def test_uniform_cvar_values():
    assert cr.uniform_cvar(0.0, 1.0, 0.2) == pytest.approx(0.9, abs=1e-15)
    assert cr.uniform_cvar(0.0, 1.0, 1.0 - 1e-12) == pytest.approx(0.5, abs=1e-9)
    assert cr.uniform_cvar(2.0, 2.0, 0.3) == 2.0
    with pytest.raises(ValueError):
        cr.uniform_cvar(1.0, 0.0, 0.2)
    with pytest.raises(ValueError):
        cr.uniform_cvar(0.0, 1.0, 0.0)


def test_exact_cvar_offsets_golden(golden_spec):
    at_zero = cr.exact_cvar_affine_additive(
        golden_spec.cost_model, np.zeros(5), golden_spec.alpha, golden_spec.uncertainty)
    assert at_zero == pytest.approx([3700.0, 950.0, 3000.0, 4600.0, 1300.0], abs=1e-12)


def test_exact_cvar_at_equilibrium(golden_spec):
    risks = cr.exact_cvar_affine_additive(
        golden_spec.cost_model, H_EXACT, golden_spec.alpha, golden_spec.uncertainty)
    assert risks[:3] == pytest.approx([8767.135] * 3, abs=1e-2)
    assert risks[3:] == pytest.approx([11261.670] * 2, abs=1e-2)


def test_exact_cvar_rejects_unsupported(golden_spec):
    mixed = cr.AffineAdditive(a=np.eye(2), b=np.zeros(2),
                              cu=np.array([[1.0, 1.0], [0.0, 0.0]]))
    box = cr.UniformBox(lo=np.zeros(2), hi=np.ones(2))
    with pytest.raises(ValueError, match="no closed form"):
        cr.exact_cvar_affine_additive(mixed, np.zeros(2), 0.2, box)
    fin = cr.FiniteSamples(draws=np.zeros((3, 2)))
    with pytest.raises(ValueError, match="uniform-box"):
        cr.exact_cvar_affine_additive(golden_spec.cost_model, np.zeros(5), 0.2, fin)
    slope = cr.AffineUncertainSlope(a=np.eye(2), b=np.zeros(2), cu=np.zeros((2, 1)),
                                    d=np.zeros((2, 2, 1)))
    with pytest.raises(ValueError, match="additive"):
        cr.exact_cvar_affine_additive(slope, np.zeros(2), 0.2,
                                      cr.UniformBox(lo=np.zeros(1), hi=np.ones(1)))


# ---------------------------------------------------------------------------
# empirical CVaR
# ---------------------------------------------------------------------------


class TestEmpiricalCvar:
    def test_hand_case_top2_mean(self):
        res = cr.empirical_cvar(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), 0.4)
        assert res.value == 4.5
        assert res.minimizer_interval == (3.0, 4.0)

    def test_single_sample(self):
        res = cr.empirical_cvar(np.array([10.0]), 0.5)
        assert res.value == 10.0
        assert res.minimizer_interval == (10.0, 10.0)

    def test_constant_samples(self):
        res = cr.empirical_cvar(np.full(40, 7.25), 0.3)
        assert res.value == 7.25
        assert res.minimizer_interval == (7.25, 7.25)

    def test_interval_is_flat_region(self):
        gen = rng(101)
        for _ in range(80):
            n = int(gen.integers(4, 40))
            z = gen.normal(0.0, 10.0, size=n)
            alpha = float(gen.uniform(0.1, 0.9))
            res = cr.empirical_cvar(z, alpha)
            lo, hi = res.minimizer_interval
            assert lo <= hi <= res.value + 1e-12
            at_ends = cvar_objective(z, alpha, np.array([lo, hi]))
            assert at_ends == pytest.approx([res.value, res.value], abs=1e-10)

    def test_near_one_alpha_is_mean(self):
        gen = rng(103)
        z = gen.uniform(0.0, 100.0, size=500)
        res = cr.empirical_cvar(z, 1.0 - 1e-9)
        assert res.value == pytest.approx(z.mean(), abs=1e-6)

    def test_small_alpha_is_max(self):
        z = np.array([3.0, 9.0, 1.0])
        res = cr.empirical_cvar(z, 0.05)
        assert res.value == 9.0

    def test_grid_oracle_sample(self):
        gen = rng(107)
        for _ in range(50):
            n = int(gen.integers(5, 60))
            alpha = float(gen.uniform(0.1, 0.95))
            z = gen.normal(0.0, 5.0, size=n) + gen.uniform(-20, 20)
            got = cr.empirical_cvar(z, alpha).value
            ref, step = cvar_grid_min(z, alpha)
            assert abs(got - ref) <= 2.0 * step + 1e-12

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            cr.empirical_cvar(np.array([]), 0.5)
        with pytest.raises(ValueError):
            cr.empirical_cvar(np.array([1.0, np.nan]), 0.5)
        for alpha in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                cr.empirical_cvar(np.array([1.0]), alpha)

    def test_integer_product_fp_guard(self):
        # n*alpha = 3*0.1*10 style products that land on integers only
        # approximately must still pick the flat interval consistently
        z = np.arange(10.0)
        res = cr.empirical_cvar(z, 0.3)
        lo, hi = res.minimizer_interval
        assert (lo, hi) == (6.0, 7.0)
        assert res.value == pytest.approx(8.0, abs=1e-12)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def test_exact_operator_matches_function(golden_spec, golden_fs):
    op = cr.cvar_operator(golden_spec)
    gen = rng(211)
    for h in cr.sample_feasible(golden_fs, 20, gen):
        want = cr.exact_cvar_affine_additive(
            golden_spec.cost_model, h, golden_spec.alpha, golden_spec.uncertainty)
        assert op(h) == pytest.approx(want, abs=1e-9)


def test_empirical_operator_fast_path_matches_generic(golden_spec, golden_fs):
    samples = cr.sample(golden_spec.uncertainty, 333, seed=5)
    op = cr.cvar_operator(golden_spec, samples)
    gen = rng(223)
    for h in cr.sample_feasible(golden_fs, 10, gen):
        z = cr.path_cost_samples(golden_spec.cost_model, h, samples.draws)
        want = np.array([cr.empirical_cvar(z[p], golden_spec.alpha).value for p in range(5)])
        assert op(h) == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_empirical_operator_single_atom_is_deterministic_cost(golden_spec):
    atom = np.array([[0.25, 0.75]])
    spec = cr.GameSpec(
        od_pairs=golden_spec.od_pairs,
        paths=golden_spec.paths,
        cost_model=golden_spec.cost_model,
        uncertainty=cr.FiniteSamples(draws=atom),
        alpha=golden_spec.alpha,
    )
    h = np.array([100.0, 100.0, 60.0, 100.0, 70.0])
    for alpha in (0.05, 0.4, 0.95):
        op = cr.EmpiricalCostOperator(spec.cost_model, cr.sample(spec.uncertainty, 25, 1), alpha)
        assert op(h) == pytest.approx(cr.eval_cost(spec.cost_model, h, atom[0]), abs=1e-9)


def test_empirical_converges_to_exact_pointwise(golden_spec):
    # estimator error at 1e5 draws must sit well inside 0.5% of the cost
    # range for essentially every seed
    h = np.array([86.0, 98.0, 76.0, 74.0, 96.0])
    alpha = golden_spec.alpha
    exact = cr.exact_cvar_affine_additive(
        golden_spec.cost_model, h, alpha, golden_spec.uncertainty)
    allowed = 0.005 * (23800.0 - 950.0)
    bad = 0
    for seed in range(100):
        draws = cr.sample(golden_spec.uncertainty, 100_000, seed).draws
        z = cr.path_cost_samples(golden_spec.cost_model, h, draws)
        est = np.array([cr.empirical_cvar(z[p], alpha).value for p in range(5)])
        if np.abs(est - exact).max() >= allowed:
            bad += 1
    assert bad <= 1


def test_reference_operator_close_to_exact(golden_spec):
    exact_op = cr.cvar_operator(golden_spec)
    ref_op = cr.reference_operator(golden_spec, n=200_000)
    h = np.array([90.0, 98.0, 72.0, 74.0, 96.0])
    assert np.abs(ref_op(h) - exact_op(h)).max() < 5.0


def test_slope_model_operator_runs():
    model = cr.AffineUncertainSlope(
        a=np.array([[2.0, 0.0], [0.0, 2.0]]),
        b=np.array([1.0, 1.0]),
        cu=np.array([[1.0], [0.0]]),
        d=np.array([[[0.5], [0.0]], [[0.0], [0.5]]]),
    )
    box = cr.UniformBox(lo=np.zeros(1), hi=np.ones(1))
    op = cr.EmpiricalCostOperator(model, cr.sample(box, 400, 6), alpha=0.25)
    h = np.array([0.5, 0.5])
    got = op(h)
    z = cr.path_cost_samples(model, h, cr.sample(box, 400, 6).draws)
    want = [cr.empirical_cvar(z[p], 0.25).value for p in range(2)]
    assert got == pytest.approx(want, abs=1e-12)


def test_operator_requires_samples_or_closed_form(golden_spec):
    spec = cr.GameSpec(
        od_pairs=golden_spec.od_pairs,
        paths=golden_spec.paths,
        cost_model=cr.AffineAdditive(
            a=golden_spec.cost_model.a,
            b=golden_spec.cost_model.b,
            cu=np.ones((5, 2)),
        ),
        uncertainty=golden_spec.uncertainty,
        alpha=golden_spec.alpha,
    )
    with pytest.raises(ValueError, match="no closed form"):
        cr.cvar_operator(spec)
    op = cr.cvar_operator(spec, cr.sample(spec.uncertainty, 50, 2))
    assert np.all(np.isfinite(op(np.array([100.0, 100.0, 60.0, 100.0, 70.0]))))
