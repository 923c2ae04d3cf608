"""Base kernel, random-walk kernel, degrees, and the lazy-walk matrix.

The walk kernel is the matrix square K = k @ k of a base kernel k with
entries in [0, 1]. Subtracting the degree diagonal and renormalizing by the
maximum degree gives the lazy-walk matrix P, which is symmetric, entrywise
nonnegative, and doubly stochastic. Reference columns k_R are the exact
columns of k at a subset of pool indices, computable without materializing
the full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .configs import ConfigError, KernelSpec
from .datagen import LabeledPool

SYMMETRY_TOL = 1e-10
ENTRY_TOL = 1e-12


class KernelError(ValueError):
    """Invalid kernel input (asymmetry, bad entries, bad indices)."""


@dataclass(frozen=True)
class KernelStack:
    """Base kernel k, walk kernel K = k @ k, degrees, and lazy-walk P."""

    base: np.ndarray
    walk: np.ndarray
    degrees: np.ndarray
    d_max: float
    lazy: np.ndarray

    @property
    def size(self) -> int:
        return self.base.shape[0]


@dataclass(frozen=True)
class ReferenceColumns:
    """Columns of the base kernel at the reference indices (pool x |R|)."""

    matrix: np.ndarray
    indices: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.intp)
        object.__setattr__(self, "indices", idx)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != idx.size:
            raise KernelError("column matrix shape does not match reference indices")

    @property
    def count(self) -> int:
        return self.indices.size


@dataclass(frozen=True)
class DegreeEstimate:
    """Rescaled-column degree estimates for the base and walk kernels.

    ``base`` is ((n+m)/|R|) * sum_r k(z, r), exactly the base-kernel degree
    when R is the whole pool. ``walk`` is the documented proxy
    base * mean(base); the walk-kernel degree itself is only estimable this
    indirectly from base-kernel columns. Exact degrees come from the stack.
    """

    base: np.ndarray
    walk: np.ndarray


def _validate_refs(refs, size: int) -> np.ndarray:
    idx = np.asarray(refs, dtype=np.intp).ravel()
    if idx.size == 0:
        raise KernelError("reference index list is empty")
    if np.any(idx < 0) or np.any(idx >= size):
        raise KernelError(f"reference index out of range for pool of size {size}")
    if np.unique(idx).size != idx.size:
        raise KernelError("duplicate reference indices")
    return idx


def local_covariances(points: np.ndarray, knn: int, regularizer: float) -> np.ndarray:
    """Per-point covariance of the knn nearest neighbors plus reg * I.

    The point itself counts as its own nearest neighbor.
    """
    count, dim = points.shape
    if knn < dim + 1:
        raise ConfigError("knn must be >= dim + 1 for local covariances")
    if knn > count:
        raise ConfigError(f"knn = {knn} exceeds pool size {count}")
    sq = cdist(points, points, "sqeuclidean")
    neighbor_idx = np.argpartition(sq, knn - 1, axis=1)[:, :knn]
    covs = np.empty((count, dim, dim))
    for i in range(count):
        covs[i] = np.cov(points[neighbor_idx[i]], rowvar=False, ddof=1)
        covs[i][np.diag_indices(dim)] += regularizer
    return covs


def _gaussian_columns(points: np.ndarray, sigma: float, refs: np.ndarray) -> np.ndarray:
    sq = cdist(points, points[refs], "sqeuclidean")
    if not np.all(np.isfinite(sq)):
        raise KernelError("non-finite pairwise distances")
    return np.exp(-sq / sigma**2)


def _local_cov_columns(
    points: np.ndarray, sigma: float, refs: np.ndarray, covs: np.ndarray
) -> np.ndarray:
    """Symmetrized anisotropic columns: 0.5 * (k(x -> r) + k(r -> x)).

    k(x -> z) centers the quadratic form on z's covariance, so each column
    needs the reference point's covariance for one direction and every
    row point's covariance for the other.
    """
    inv = np.linalg.inv(covs)
    out = np.empty((points.shape[0], refs.size))
    s2 = sigma**2
    for j, r in enumerate(refs):
        diffs = points - points[r]
        q_ref = np.einsum("nd,de,ne->n", diffs, inv[r], diffs)
        q_row = np.einsum("nd,nde,ne->n", diffs, inv, diffs)
        if not (np.all(np.isfinite(q_ref)) and np.all(np.isfinite(q_row))):
            raise KernelError("non-finite anisotropic distances")
        out[:, j] = 0.5 * (np.exp(-q_ref / s2) + np.exp(-q_row / s2))
    return out


def _kernel_columns(
    points: np.ndarray,
    spec: KernelSpec,
    refs: np.ndarray,
    covariances: np.ndarray | None = None,
) -> np.ndarray:
    if spec.kind == "gaussian":
        return _gaussian_columns(points, spec.bandwidth, refs)
    covs = (
        local_covariances(points, spec.knn, spec.regularizer)
        if covariances is None
        else covariances
    )
    return _local_cov_columns(points, spec.bandwidth, refs, covs)


def build_base_kernel(pool: LabeledPool, spec: KernelSpec) -> np.ndarray:
    """Full (n+m) x (n+m) base kernel.

    Built column-by-column through the same code path as reference_columns,
    so extracted columns always agree bit-exactly with the full matrix.
    """
    points = pool.pooled()
    return _kernel_columns(points, spec, np.arange(points.shape[0]))


def reference_columns(pool: LabeledPool, spec: KernelSpec, refs) -> ReferenceColumns:
    """Base-kernel columns at distinct pool indices, full matrix never built."""
    points = pool.pooled()
    idx = _validate_refs(refs, points.shape[0])
    return ReferenceColumns(_kernel_columns(points, spec, idx), idx)


def reference_columns_from_matrix(k: np.ndarray, refs) -> ReferenceColumns:
    """Slice reference columns out of an already-built base kernel."""
    idx = _validate_refs(refs, k.shape[0])
    return ReferenceColumns(k[:, idx].copy(), idx)


def build_stack(k: np.ndarray) -> KernelStack:
    """Assemble walk kernel, degrees, and lazy-walk matrix from base k."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise KernelError("base kernel must be square")
    if not np.all(np.isfinite(k)):
        raise KernelError("base kernel has non-finite entries")
    asym = np.max(np.abs(k - k.T)) if k.size else 0.0
    if asym > SYMMETRY_TOL:
        raise KernelError(f"base kernel asymmetry {asym:.3e} exceeds {SYMMETRY_TOL}")
    if k.min() < -ENTRY_TOL or k.max() > 1.0 + ENTRY_TOL:
        raise KernelError("base kernel entries must lie in [0, 1]")

    walk = k @ k
    degrees = walk.sum(axis=1)
    d_max = float(degrees.max())
    lazy = walk.copy()
    np.fill_diagonal(lazy, walk.diagonal() - degrees + d_max)
    lazy /= d_max
    return KernelStack(base=k, walk=walk, degrees=degrees, d_max=d_max, lazy=lazy)


def build_kernel_stack(pool: LabeledPool, spec: KernelSpec) -> KernelStack:
    """Convenience: base kernel + stack in one call."""
    return build_stack(build_base_kernel(pool, spec))


def estimate_degrees(columns: ReferenceColumns, n_plus_m: int) -> DegreeEstimate:
    """Degree estimates from reference columns alone."""
    if columns.count < 1:
        raise KernelError("degree estimation needs at least one reference column")
    base = (n_plus_m / columns.count) * columns.matrix.sum(axis=1)
    walk = base * base.mean()
    return DegreeEstimate(base=base, walk=walk)


def export_matrix_csv(matrix: np.ndarray, path) -> None:
    """Row-major CSV dump at 17 significant digits (lossless for float64)."""
    np.savetxt(path, np.atleast_2d(matrix), fmt="%.17g", delimiter=",")
