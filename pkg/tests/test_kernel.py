import numpy as np
import numpy.testing as npt
import pytest

from refmmd.configs import ConfigError, KernelSpec
from refmmd.datagen import LabeledPool, PointCloud, generate
from refmmd.configs import GeneratorConfig
from refmmd.kernel import (
    KernelError,
    _local_cov_columns,
    build_base_kernel,
    build_kernel_stack,
    build_stack,
    estimate_degrees,
    export_matrix_csv,
    local_covariances,
    reference_columns,
    reference_columns_from_matrix,
)
from refmmd import rng


def small_pool(n=12, m=14, dim=3, seed=0):
    return generate(
        GeneratorConfig(family="gaussian-anomaly", shift=0.0, n=n, m=m, dim=dim, seed=seed)
    )


def test_gaussian_kernel_values():
    pts = np.array([[0.0, 0.0], [0.7, 0.0]])
    pool = LabeledPool(PointCloud(pts[:1]), PointCloud(pts[1:]))
    sigma = 0.7
    k = build_base_kernel(pool, KernelSpec(bandwidth=sigma))
    assert k[0, 0] == 1.0 and k[1, 1] == 1.0
    # two points at distance sigma: k = exp(-1)
    npt.assert_allclose(k[0, 1], np.exp(-1.0), rtol=1e-15)
    npt.assert_array_equal(k, k.T)


def test_stack_identity_kernel():
    stack = build_stack(np.eye(6))
    npt.assert_array_equal(stack.walk, np.eye(6))
    npt.assert_array_equal(stack.degrees, np.ones(6))
    assert stack.d_max == 1.0
    npt.assert_array_equal(stack.lazy, np.eye(6))


def test_stack_all_ones_kernel():
    n = 5
    stack = build_stack(np.ones((n, n)))
    npt.assert_allclose(stack.walk, n * np.ones((n, n)))
    npt.assert_allclose(stack.degrees, n * n * np.ones(n))
    npt.assert_allclose(stack.lazy, np.ones((n, n)) / n)


def test_stack_row_sums_and_spectrum():
    pool = small_pool(seed=3)
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=1.0))
    npt.assert_allclose(stack.lazy.sum(axis=1), 1.0, atol=1e-10)
    npt.assert_allclose(stack.lazy.sum(axis=0), 1.0, atol=1e-10)
    assert stack.lazy.min() >= 0.0
    vals = np.linalg.eigvalsh(stack.lazy)
    assert vals.min() >= -1.0 - 1e-8 and vals.max() <= 1.0 + 1e-8
    # uniform vector is stationary
    ones = np.full(pool.size, 1.0 / pool.size)
    npt.assert_allclose(stack.lazy @ ones, ones, atol=1e-10)


def test_walk_kernel_psd_spot_check():
    pool = small_pool(seed=5)
    stack = build_kernel_stack(pool, KernelSpec(bandwidth=0.8))
    g = rng.stream(17)
    for _ in range(20):
        u = g.standard_normal(pool.size)
        quad = u @ stack.walk @ u
        npt.assert_allclose(quad, np.linalg.norm(stack.base @ u) ** 2, rtol=1e-10)
        assert quad >= -1e-10


def test_build_stack_rejects_bad_input():
    with pytest.raises(KernelError):
        build_stack(np.ones((3, 4)))
    asym = np.eye(3)
    asym[0, 1] = 1e-6
    with pytest.raises(KernelError, match="asymmetry"):
        build_stack(asym)
    with pytest.raises(KernelError, match="0, 1"):
        build_stack(np.full((3, 3), 1.5))


def test_reference_columns_bit_exact():
    pool = small_pool(seed=9)
    spec = KernelSpec(bandwidth=0.6)
    k = build_base_kernel(pool, spec)
    refs = [3, 0, 17, 8]
    cols = reference_columns(pool, spec, refs)
    npt.assert_array_equal(cols.matrix, k[:, refs])


def test_reference_columns_full_set_and_single():
    pool = small_pool(seed=1)
    spec = KernelSpec(bandwidth=0.6)
    k = build_base_kernel(pool, spec)
    cols = reference_columns(pool, spec, np.arange(pool.size))
    npt.assert_array_equal(cols.matrix, k)
    single = reference_columns(pool, spec, [7])
    assert single.matrix.shape == (pool.size, 1)
    assert single.matrix[7, 0] == 1.0


def test_reference_columns_validation():
    pool = small_pool()
    spec = KernelSpec()
    with pytest.raises(KernelError, match="range"):
        reference_columns(pool, spec, [0, 99])
    with pytest.raises(KernelError, match="duplicate"):
        reference_columns(pool, spec, [1, 1])
    with pytest.raises(KernelError, match="empty"):
        reference_columns(pool, spec, [])


def test_estimate_degrees_full_sample_exact():
    pool = small_pool(seed=2)
    spec = KernelSpec(bandwidth=0.9)
    k = build_base_kernel(pool, spec)
    cols = reference_columns(pool, spec, np.arange(pool.size))
    est = estimate_degrees(cols, pool.size)
    npt.assert_array_equal(est.base, k.sum(axis=1))


def test_estimate_degrees_constant_kernel():
    n = 8
    cols = reference_columns_from_matrix(np.ones((n, n)), [2, 5])
    est = estimate_degrees(cols, n)
    npt.assert_allclose(est.base, n)
    npt.assert_allclose(est.walk, n * n)


def test_estimate_degrees_monte_carlo():
    # estimator averaged across reference draws approaches the exact degree
    pool = small_pool(n=50, m=50, dim=3, seed=21)
    spec = KernelSpec(bandwidth=1.5)
    k = build_base_kernel(pool, spec)
    exact = k.sum(axis=1)
    acc = np.zeros(pool.size)
    draws = 200
    g = rng.stream(55)
    for _ in range(draws):
        idx = g.choice(pool.size, 50, replace=False)
        est = estimate_degrees(reference_columns_from_matrix(k, idx), pool.size)
        acc += est.base
    npt.assert_allclose(acc / draws, exact, rtol=0.05)


def test_local_covariance_reduces_to_gaussian_with_identity_covs():
    pool = small_pool(seed=6)
    pts = pool.pooled()
    sigma = 0.8
    eye = np.broadcast_to(np.eye(3), (pool.size, 3, 3)).copy()
    cols = _local_cov_columns(pts, sigma, np.arange(pool.size), eye)
    gauss = build_base_kernel(pool, KernelSpec(bandwidth=sigma))
    npt.assert_allclose(cols, gauss, atol=1e-10)


def test_local_covariance_kernel_properties():
    pool = small_pool(n=15, m=15, seed=8)
    spec = KernelSpec(kind="local-covariance", bandwidth=0.8, knn=6, regularizer=1e-3)
    k = build_base_kernel(pool, spec)
    npt.assert_array_equal(k, k.T)
    assert k.min() >= 0.0 and k.max() <= 1.0
    npt.assert_allclose(np.diag(k), 1.0)
    # columns agree with the full build
    cols = reference_columns(pool, spec, [4, 20])
    npt.assert_array_equal(cols.matrix, k[:, [4, 20]])
    # and the stack machinery accepts it
    stack = build_stack(k)
    npt.assert_allclose(stack.lazy.sum(axis=1), 1.0, atol=1e-10)


def test_local_covariances_validation():
    pts = np.zeros((5, 3))
    with pytest.raises(ConfigError, match="knn"):
        local_covariances(pts, knn=2, regularizer=1e-6)
    with pytest.raises(ConfigError, match="exceeds"):
        local_covariances(pts, knn=9, regularizer=1e-6)


def test_export_matrix_csv_round_trip(tmp_path):
    g = rng.stream(2)
    mat = g.random((4, 4))
    mat = 0.5 * (mat + mat.T)
    path = tmp_path / "k.csv"
    export_matrix_csv(mat, path)
    loaded = np.loadtxt(path, delimiter=",")
    npt.assert_array_equal(loaded, mat)
