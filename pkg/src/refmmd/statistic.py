"""MMD statistics: full, reference-point, weighted, and the witness vector.

The witness f(z) is the squared renormalized difference of empirical base
kernel means at z; its pool average equals the walk-kernel MMD^2, so the
(weighted) reference statistic is a quadrature rule for the full one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import LabeledPool
from .kernel import KernelStack, ReferenceColumns

WEIGHT_SUM_TOL = 1e-9


class StatisticError(ValueError):
    """Invalid reference set or mismatched inputs."""


@dataclass(frozen=True)
class ReferenceSet:
    """Distinct pool indices with simplex weights."""

    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.intp).ravel()
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)
        if idx.size != w.size:
            raise StatisticError("indices and weights must have equal length")
        if idx.size == 0:
            raise StatisticError("reference set is empty")
        if np.unique(idx).size != idx.size:
            raise StatisticError("duplicate reference indices")
        if np.any(idx < 0):
            raise StatisticError("negative reference index")
        if np.any(w < 0.0) or np.any(w > 1.0):
            raise StatisticError("weights must lie in [0, 1]")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise StatisticError(f"weights sum to {w.sum():.12f}, not 1")

    @property
    def count(self) -> int:
        return self.indices.size


def uniform_reference(indices) -> ReferenceSet:
    """Reference set with equal weights 1/|R|."""
    idx = np.asarray(indices, dtype=np.intp).ravel()
    return ReferenceSet(idx, np.full(idx.size, 1.0 / idx.size))


@dataclass(frozen=True)
class WitnessVector:
    """Per-point witness values f(z); nonnegative, mean equals MMD^2."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=np.float64).ravel()
        )

    @property
    def size(self) -> int:
        return self.values.size


def mmd_full(stack: KernelStack, pool: LabeledPool) -> tuple[float, float]:
    """Walk-kernel MMD.

    Returns (mmd_sq, tau): the raw squared statistic, which may be a tiny
    negative from floating point, and tau = sqrt(max(mmd_sq, 0)).
    """
    if stack.size != pool.size:
        raise StatisticError("stack size does not match pool size")
    n, m = pool.n, pool.m
    K = stack.walk
    xx = K[:n, :n].sum()
    yy = K[n:, n:].sum()
    xy = K[:n, n:].sum()
    mmd_sq = xx / n**2 + yy / m**2 - 2.0 * xy / (n * m)
    tau = float(np.sqrt(max(mmd_sq, 0.0)))
    return float(mmd_sq), tau


def witness(stack: KernelStack, pool: LabeledPool) -> WitnessVector:
    """f(z) = (sqrt(n+m)/n * sum_x k(x,z) - sqrt(n+m)/m * sum_y k(y,z))^2."""
    if stack.size != pool.size:
        raise StatisticError("stack size does not match pool size")
    n, m = pool.n, pool.m
    root = np.sqrt(n + m)
    col_x = stack.base[:n, :].sum(axis=0)
    col_y = stack.base[n:, :].sum(axis=0)
    f = (root / n * col_x - root / m * col_y) ** 2
    return WitnessVector(f)


def reference_evaluations(
    columns: ReferenceColumns, n: int, m: int
) -> np.ndarray:
    """g(r) = sqrt(n+m)/n * sum_x k(x,r) - sqrt(n+m)/m * sum_y k(y,r)."""
    root = np.sqrt(n + m)
    gx = columns.matrix[:n, :].sum(axis=0)
    gy = columns.matrix[n:, :].sum(axis=0)
    return root / n * gx - root / m * gy


def mmd_reference(
    columns: ReferenceColumns,
    pool: LabeledPool,
    refs: ReferenceSet,
    weighted: bool = True,
) -> float:
    """Reference-point MMD^2: sum_r a(r) g(r)^2, uniform a if unweighted."""
    if not np.array_equal(refs.indices, columns.indices):
        raise StatisticError("reference set indices do not match the columns")
    if columns.matrix.shape[0] != pool.size:
        raise StatisticError("columns row count does not match pool size")
    g = reference_evaluations(columns, pool.n, pool.m)
    g_sq = g**2
    if weighted:
        return float(refs.weights @ g_sq)
    return float(g_sq.mean())
