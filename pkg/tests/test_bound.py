import numpy as np
import numpy.testing as npt
import pytest

from refmmd.bound import (
    BoundError,
    bound_vs_size_curve,
    evaluate_bound,
    lambda_grid,
    quadrature_argument,
    select_lambda,
)
from refmmd.configs import GeneratorConfig, KernelSpec
from refmmd.datagen import generate
from refmmd.kernel import build_kernel_stack
from refmmd.refselect import select_random
from refmmd.spectral import decompose
from refmmd.statistic import ReferenceSet, uniform_reference
from refmmd import rng


def setup(n=25, m=25, seed=0, shift=0.2, bandwidth=0.9, dim=3):
    pool = generate(
        GeneratorConfig(
            family="gaussian-anomaly", shift=shift, n=n, m=m, dim=dim, seed=seed
        )
    )
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=bandwidth))
    return pool, stack, decompose(stack)


def random_simplex(g, size):
    w = g.dirichlet(np.ones(size))
    return w / w.sum()


def test_quadrature_floor_for_uniform_all():
    pool, stack, _ = setup(seed=1)
    refs = uniform_reference(np.arange(pool.size))
    assert abs(quadrature_argument(stack, refs)) <= 1e-10


def test_uniform_all_report_is_degenerate_floor():
    pool, stack, basis = setup(seed=2)
    refs = uniform_reference(np.arange(pool.size))
    rep = evaluate_bound(stack, pool, refs, basis, lam=0.5)
    assert rep.quadrature_term <= 1e-5
    assert rep.actual_deviation <= 1e-10


def test_full_projection_reduces_to_t1():
    pool, stack, basis = setup(seed=3)
    idx = select_random(pool, 8, seed=5)
    refs = uniform_reference(idx)
    lam = np.abs(basis.eigenvalues).min() * 0.5
    rep = evaluate_bound(stack, pool, refs, basis, lam)
    assert rep.kept_count == pool.size
    assert rep.proof_terms[1] <= 1e-12 and rep.proof_terms[2] <= 1e-12
    npt.assert_allclose(rep.actual_deviation, rep.proof_terms[0], atol=1e-10)


def test_triangle_split_on_random_instances():
    # brute-force recomputation of each term from raw sums
    g = rng.stream(900)
    for trial in range(25):
        n, m = int(g.integers(10, 31)), int(g.integers(10, 31))
        pool, stack, basis = setup(n=n, m=m, seed=trial, shift=0.3)
        size = int(g.integers(2, pool.size))
        idx = np.sort(g.choice(pool.size, size, replace=False))
        weights = random_simplex(g, size)
        refs = ReferenceSet(idx, weights)
        lam = float(g.uniform(0.05, 0.95))
        rep = evaluate_bound(stack, pool, refs, basis, lam)

        # oracle: raw sums over explicit projections
        kept = int(np.count_nonzero(np.abs(basis.eigenvalues) > lam))
        phi = basis.eigenvectors[:, :kept]
        from refmmd.statistic import witness

        f = witness(stack, pool).values
        f_low = phi @ (phi.T @ f)
        f_high = f - f_low
        t1 = abs(sum(f_low) / pool.size - sum(weights[i] * f_low[idx[i]] for i in range(size)))
        t2 = abs(sum(f_high) / pool.size)
        t3 = abs(sum(weights[i] * f_high[idx[i]] for i in range(size)))
        npt.assert_allclose(rep.proof_terms, (t1, t2, t3), atol=1e-10)
        assert rep.actual_deviation <= t1 + t2 + t3 + 1e-8


def test_total_bound_nonnegative():
    pool, stack, basis = setup(seed=6)
    idx = select_random(pool, 6, seed=1)
    refs = uniform_reference(idx)
    for lam in lambda_grid(basis):
        rep = evaluate_bound(stack, pool, refs, basis, float(lam))
        assert 0.0 <= rep.eps_paper <= 1.0
        assert rep.total_bound >= 0.0
        assert rep.quadrature_arg >= -1e-10


def test_linderman_term_reported():
    pool, stack, basis = setup(seed=7)
    refs = uniform_reference(select_random(pool, 10, seed=3))
    rep = evaluate_bound(stack, pool, refs, basis, lam=0.4)
    assert rep.linderman_lhs == rep.proof_terms[0]
    assert np.isfinite(rep.linderman_rhs)


def test_select_lambda_minimizes_grid():
    pool, stack, basis = setup(seed=8)
    refs = uniform_reference(select_random(pool, 10, seed=4))
    best = select_lambda(stack, pool, refs, basis)
    totals = [
        evaluate_bound(stack, pool, refs, basis, float(lam)).total_bound
        for lam in lambda_grid(basis)
    ]
    npt.assert_allclose(best.total_bound, min(totals), rtol=1e-12)


def test_bound_curve_floor_at_full_size():
    pool, stack, _ = setup(seed=9)
    curve = bound_vs_size_curve(stack, pool, [pool.size], 3, seed=0)
    for row in curve.rows:
        assert row.quadrature_term <= 1e-5
        assert row.deviation <= 1e-10


def test_bound_curve_uniform_norm_exact():
    pool, stack, _ = setup(seed=10)
    curve = bound_vs_size_curve(stack, pool, [10, 25], 4, seed=1)
    for row in curve.rows:
        assert row.a_norm == 1.0 / np.sqrt(row.r_size)


def test_bound_curve_negative_slope():
    # log-log regression of deviation vs |R| must slope downward
    pool, stack, _ = setup(n=50, m=50, seed=12, shift=0.1)
    sizes = [10, 25, 50, 100]
    curve = bound_vs_size_curve(stack, pool, sizes, 30, seed=2)
    devs = [s.mean_deviation for s in curve.summaries]
    slope = np.polyfit(np.log(sizes), np.log(devs), 1)[0]
    assert slope < 0.0


def test_bound_curve_size_validation():
    pool, stack, _ = setup()
    with pytest.raises(BoundError):
        bound_vs_size_curve(stack, pool, [pool.size + 1], 2)


def test_refs_out_of_range_rejected():
    pool, stack, basis = setup()
    refs = ReferenceSet(np.array([0, pool.size + 3]), np.array([0.5, 0.5]))
    with pytest.raises(BoundError):
        evaluate_bound(stack, pool, refs, basis, 0.5)
