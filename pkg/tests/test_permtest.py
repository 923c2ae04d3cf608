import dataclasses

import numpy as np
import numpy.testing as npt
import pytest

from refmmd.configs import (
    GeneratorConfig,
    KernelSpec,
    OptimizeConfig,
    PermTestConfig,
    SelectConfig,
)
from refmmd.datagen import LabeledPool, PointCloud, generate
from refmmd.kernel import build_kernel_stack, reference_columns_from_matrix
from refmmd.permtest import (
    default_lambda,
    make_full_evaluator,
    make_reference_evaluator,
    permutation_test,
    power_curve,
)
from refmmd.statistic import StatisticError, mmd_full, uniform_reference
from refmmd import rng


def make_pool(n=30, m=30, dim=3, seed=0, shift=0.0):
    return generate(
        GeneratorConfig(
            family="gaussian-anomaly", shift=shift, n=n, m=m, dim=dim, seed=seed
        )
    )


def test_full_evaluator_matches_mmd_full():
    pool = make_pool(seed=1, shift=0.3)
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=0.8))
    ev = make_full_evaluator(stack)
    observed = ev(pool.x_indices(), pool.y_indices())
    npt.assert_allclose(observed, mmd_full(stack, pool)[0], atol=1e-12)


def test_reference_evaluator_matches_statistic():
    from refmmd.statistic import mmd_reference

    pool = make_pool(seed=2, shift=0.3)
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=0.8))
    idx = np.array([0, 7, 31, 50])
    cols = reference_columns_from_matrix(stack.base, idx)
    ev = make_reference_evaluator(cols)
    npt.assert_allclose(
        ev(pool.x_indices(), pool.y_indices()),
        mmd_reference(cols, pool, uniform_reference(idx), weighted=False),
        atol=1e-14,
    )


def test_p_value_range_and_smoothing():
    pool = make_pool(seed=3)
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=0.8))
    cfg = PermTestConfig(num_permutations=37, alpha=0.05, seed=5)
    res = permutation_test(pool, make_full_evaluator(stack), cfg)
    assert 0.0 < res.p_value <= 1.0
    assert res.permuted.shape == (37,)
    # smoothed definition exactly
    expected = (1 + np.count_nonzero(res.permuted >= res.observed)) / 38
    npt.assert_allclose(res.p_value, expected, rtol=1e-15)


def test_constant_statistic_gives_p_one():
    pool = make_pool()
    cfg = PermTestConfig(num_permutations=25, seed=1)
    res = permutation_test(pool, lambda xi, yi: 1.0, cfg)
    assert res.p_value == 1.0
    assert not res.reject


def test_identical_samples_never_reject():
    pts = rng.stream(8).standard_normal((10, 2))
    pool = LabeledPool(PointCloud(pts), PointCloud(pts.copy()))
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=1.0))
    for seed in range(20):
        res = permutation_test(
            pool,
            make_full_evaluator(stack),
            PermTestConfig(num_permutations=60, seed=seed),
        )
        assert not res.reject


def test_tiny_pool_enumeration_oracle():
    # recompute the p-value from the recorded splits with an independent
    # double-sum statistic; both paths must agree exactly
    pool = make_pool(n=3, m=3, dim=2, seed=4, shift=0.5)
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=0.9))
    cfg = PermTestConfig(num_permutations=20, seed=9)
    res = permutation_test(pool, make_full_evaluator(stack), cfg)

    K = stack.walk

    def brute(x_idx, y_idx):
        xx = sum(K[i, j] for i in x_idx for j in x_idx)
        yy = sum(K[i, j] for i in y_idx for j in y_idx)
        xy = sum(K[i, j] for i in x_idx for j in y_idx)
        return xx / 9 + yy / 9 - 2 * xy / 9

    observed = brute(range(3), range(3, 6))
    count = sum(
        1 for split in res.splits if brute(split[:3], split[3:]) >= observed - 1e-15
    )
    npt.assert_allclose(res.p_value, (1 + count) / 21, rtol=1e-12)


def test_determinism_across_calls():
    pool = make_pool(seed=5)
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=0.8))
    cfg = PermTestConfig(num_permutations=50, seed=123)
    a = permutation_test(pool, make_full_evaluator(stack), cfg)
    b = permutation_test(pool, make_full_evaluator(stack), cfg)
    assert a.p_value == b.p_value
    npt.assert_array_equal(a.permuted, b.permuted)


def test_small_pool_rejected():
    pool = LabeledPool(
        PointCloud(np.zeros((1, 2))), PointCloud(np.ones((5, 2)))
    )
    with pytest.raises(StatisticError):
        permutation_test(pool, lambda a, b: 0.0, PermTestConfig(num_permutations=5))


def test_null_rejection_rate_calibrated():
    # light version of the acceptance calibration: 60 trials
    rejects = 0
    trials = 60
    for t in range(trials):
        pool = make_pool(n=40, m=40, seed=rng.derive_seed(3, t), shift=0.0)
        stack = build_kernel_stack(pool, KernelSpec(bandwidth=0.8))
        cfg = PermTestConfig(num_permutations=99, seed=rng.derive_seed(4, t))
        rejects += permutation_test(pool, make_full_evaluator(stack), cfg).reject
    assert 0.0 <= rejects / trials <= 0.13


def test_default_lambda_is_spectral_and_valid():
    pool = make_pool(seed=6)
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=0.8))
    lam = default_lambda(stack)
    vals = np.abs(np.linalg.eigvalsh(stack.lazy))
    assert 0.0 < lam < vals.max()


def test_power_curve_shapes_and_null_level():
    gen = GeneratorConfig(family="gaussian-anomaly", n=60, m=60, dim=5, seed=0)
    curve = power_curve(
        gen,
        (0.0, 0.3),
        trials=12,
        perm_cfg=PermTestConfig(num_permutations=60, alpha=0.05),
        variants=("full", "reference-uniform", "reference-weighted"),
        kernel_spec=KernelSpec(bandwidth=0.5),
        select_cfg=SelectConfig(initial_size=10),
        optimize_cfg=OptimizeConfig(eps_paper=0.9),
        master_seed=21,
    )
    assert len(curve.cells) == 6
    by_key = {(c.delta, c.variant): c for c in curve.cells}
    # power should rise from the null to the strong alternative
    assert by_key[(0.3, "full")].power >= by_key[(0.0, "full")].power
    for c in curve.cells:
        assert 0.0 <= c.power <= 1.0
        if c.variant == "full":
            assert c.mean_abs_deviation is None
        else:
            assert c.mean_abs_deviation >= 0.0


def test_power_curve_deterministic():
    gen = GeneratorConfig(family="sphere-shift", n=40, m=40, seed=0)
    kwargs = dict(
        deltas=(0.0,),
        trials=5,
        perm_cfg=PermTestConfig(num_permutations=40),
        variants=("reference-uniform",),
        kernel_spec=KernelSpec(bandwidth=0.7),
        select_cfg=SelectConfig(initial_size=8),
        master_seed=5,
    )
    a = power_curve(gen, **kwargs)
    b = power_curve(gen, **kwargs)
    assert [dataclasses.asdict(c) for c in a.cells] == [
        dataclasses.asdict(c) for c in b.cells
    ]
