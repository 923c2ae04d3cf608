"""Reference-point selection and simplex-constrained weight optimization.

Selection is either a uniform random subset or the coverage heuristic:
start random, then repeatedly add the pool point with the smallest total
affinity to the current reference set until every outside point clears the
coverage threshold.

Weights minimize

    J(a) = (1 - eps)/lam * sqrt(||P a_vec||^2 - 1/(n+m))
           + eps * (1/sqrt(n+m) + ||a||_2)

over the probability simplex by projected gradient descent with a halving
line search, which makes the objective monotone by construction. In
reference-only mode the lazy-walk columns are replaced by estimates built
from the reference columns; exact mode is authoritative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .configs import ConfigError, KernelSpec, OptimizeConfig, SelectConfig
from .datagen import LabeledPool
from .kernel import (
    DegreeEstimate,
    KernelStack,
    ReferenceColumns,
    estimate_degrees,
    reference_columns,
)
from .statistic import ReferenceSet

GRAD_CLAMP = 1e-14
MAX_BACKTRACKS = 60


class OptimizeError(ValueError):
    """Degenerate optimization input (non-finite gradient, bad refs)."""


def select_random(pool: LabeledPool, size: int, seed: int = 0) -> np.ndarray:
    """Uniform reference sample without replacement, deterministic per seed."""
    if size < 1 or size > pool.size:
        raise ConfigError(f"reference size {size} outside 1..{pool.size}")
    g = rng.stream(seed, rng.REFERENCE_SELECT)
    return np.sort(g.choice(pool.size, size=size, replace=False))


@dataclass(frozen=True)
class CoverageResult:
    indices: np.ndarray
    columns: ReferenceColumns
    degrees: DegreeEstimate
    additions: int
    saturated: bool  # max_additions hit with points still uncovered


def select_with_coverage(
    pool: LabeledPool, spec: KernelSpec, cfg: SelectConfig
) -> CoverageResult:
    """Random start, then greedily add the least-covered point.

    Coverage of x is sum_r k(x, r) over the current reference set. Points
    are added (worst first) while any non-reference point sits below the
    threshold and the addition budget lasts.
    """
    indices = list(select_random(pool, cfg.initial_size, cfg.seed))
    columns = reference_columns(pool, spec, indices)
    matrix = columns.matrix
    coverage = matrix.sum(axis=1)
    in_ref = np.zeros(pool.size, dtype=bool)
    in_ref[indices] = True

    additions = 0
    saturated = False
    while True:
        outside = np.flatnonzero(~in_ref)
        if outside.size == 0:
            break
        worst = outside[np.argmin(coverage[outside])]
        if coverage[worst] >= cfg.coverage_threshold:
            break
        if additions >= cfg.max_additions:
            saturated = True
            break
        new_col = reference_columns(pool, spec, [worst]).matrix
        matrix = np.concatenate([matrix, new_col], axis=1)
        coverage += new_col[:, 0]
        indices.append(int(worst))
        in_ref[worst] = True
        additions += 1

    idx = np.asarray(indices, dtype=np.intp)
    cols = ReferenceColumns(matrix, idx)
    return CoverageResult(
        indices=idx,
        columns=cols,
        degrees=estimate_degrees(cols, pool.size),
        additions=additions,
        saturated=saturated,
    )


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {a >= 0, sum a = 1} (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, v.size + 1)
    rho = np.nonzero(u + (1.0 - css) / ks > 0.0)[0][-1]
    theta = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + theta, 0.0)


@dataclass(frozen=True)
class QuadratureOperator:
    """Columns M of the normalized diffusion operator at the references.

    The flatness defect is q(a) = ||M a||^2 - 1/(n+m). Exact mode slices
    the lazy-walk matrix. Reference-only mode estimates the walk-kernel
    columns (k @ k_R when the full base kernel is at hand, otherwise the
    rescaled k_R @ k_R[R, :] proxy), estimates degrees by rescaling the
    estimated column sums, and assembles M from those. At R = all points
    the estimates collapse to the exact operator.
    """

    matrix: np.ndarray
    n_plus_m: int
    mode: str

    def flatness(self, a: np.ndarray) -> tuple[float, np.ndarray]:
        ma = self.matrix @ a
        return float(ma @ ma - 1.0 / self.n_plus_m), ma


def quadrature_operator(
    refs: np.ndarray,
    n_plus_m: int,
    stack: KernelStack | None = None,
    columns: ReferenceColumns | None = None,
    base_kernel: np.ndarray | None = None,
) -> QuadratureOperator:
    refs = np.asarray(refs, dtype=np.intp)
    if stack is not None:
        return QuadratureOperator(stack.lazy[:, refs].copy(), n_plus_m, "exact")
    if columns is None:
        raise OptimizeError("need a kernel stack or reference columns")
    if not np.array_equal(columns.indices, refs):
        raise OptimizeError("reference columns do not match the index list")
    r = refs.size
    if base_kernel is not None:
        walk_cols = base_kernel @ columns.matrix
    else:
        walk_cols = (n_plus_m / r) * (columns.matrix @ columns.matrix[refs, :])
    degrees = (n_plus_m / r) * walk_cols.sum(axis=1)
    d_max = float(degrees.max())
    m = walk_cols / d_max
    m[refs, np.arange(r)] += (d_max - degrees[refs]) / d_max
    return QuadratureOperator(m, n_plus_m, "reference-only")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    quad_term: float
    a_norm2: float
    step_size: float


@dataclass(frozen=True)
class OptimizeResult:
    reference_set: ReferenceSet
    objective: float
    iterations: int
    converged: bool
    trace: list[TraceRow]


def weight_objective(
    op: QuadratureOperator, lam: float, eps: float
) -> "_Objective":
    return _Objective(op, lam, eps)


class _Objective:
    """J(a) and its gradient for a fixed quadrature operator."""

    def __init__(self, op: QuadratureOperator, lam: float, eps: float):
        if not lam > 0.0:
            raise ConfigError("lam must be > 0")
        if not 0.0 <= eps <= 1.0:
            raise ConfigError("eps must lie in [0, 1]")
        self.op = op
        self.lam = lam
        self.eps = eps
        self._c1 = (1.0 - eps) / lam
        self._c2 = 1.0 / np.sqrt(op.n_plus_m)

    def value(self, a: np.ndarray) -> tuple[float, float, float]:
        """Returns (J, quadrature_term, ||a||_2)."""
        q, _ = self.op.flatness(a)
        quad = np.sqrt(max(q, 0.0))
        a_norm = float(np.linalg.norm(a))
        return self._c1 * quad + self.eps * (self._c2 + a_norm), float(quad), a_norm

    def gradient(self, a: np.ndarray) -> np.ndarray:
        q, ma = self.op.flatness(a)
        # clamp inside the root so the gradient stays finite at the floor
        denom = np.sqrt(max(q, GRAD_CLAMP))
        grad = self._c1 * (self.op.matrix.T @ ma) / denom
        a_norm = np.linalg.norm(a)
        grad += self.eps * a / a_norm
        if not np.all(np.isfinite(grad)):
            raise OptimizeError("non-finite gradient (degenerate operator)")
        return grad


def optimize_weights(
    pool: LabeledPool,
    refs,
    cfg: OptimizeConfig,
    stack: KernelStack | None = None,
    columns: ReferenceColumns | None = None,
    base_kernel: np.ndarray | None = None,
) -> OptimizeResult:
    """Projected gradient descent from uniform weights.

    Each iteration halves the step from ``step_init`` until the objective
    decreases; if no halving helps, or the decrease drops below
    ``tolerance``, the run stops. The accepted objective sequence is
    strictly decreasing.
    """
    refs = np.asarray(refs, dtype=np.intp)
    if cfg.lam is None:
        raise ConfigError("optimize config needs a concrete lam")
    op = quadrature_operator(
        refs, pool.size, stack=stack, columns=columns, base_kernel=base_kernel
    )
    obj = _Objective(op, cfg.lam, cfg.eps_paper)

    r = refs.size
    a = np.full(r, 1.0 / r)
    j_val, quad, a_norm = obj.value(a)
    trace = [TraceRow(0, j_val, quad, a_norm**2, 0.0)]
    if r == 1:
        return OptimizeResult(
            reference_set=ReferenceSet(refs, np.array([1.0])),
            objective=j_val,
            iterations=0,
            converged=True,
            trace=trace,
        )

    converged = False
    iterations = 0
    for it in range(1, cfg.max_iters + 1):
        grad = obj.gradient(a)
        step = cfg.step_init
        accepted = None
        for _ in range(MAX_BACKTRACKS):
            cand = project_simplex(a - step * grad)
            j_cand, quad_cand, norm_cand = obj.value(cand)
            if j_cand < j_val:
                accepted = (cand, j_cand, quad_cand, norm_cand)
                break
            step *= 0.5
        if accepted is None:
            converged = True
            break
        cand, j_cand, quad_cand, norm_cand = accepted
        delta = j_val - j_cand
        a, j_val = cand, j_cand
        iterations = it
        trace.append(TraceRow(it, j_val, quad_cand, norm_cand**2, step))
        if delta < cfg.tolerance:
            converged = True
            break

    # projection keeps the simplex to float accuracy; tidy the tail and
    # recompute J so the reported objective matches the returned weights
    a = np.clip(a, 0.0, 1.0)
    a /= a.sum()
    j_val, _, _ = obj.value(a)
    return OptimizeResult(
        reference_set=ReferenceSet(refs, a),
        objective=j_val,
        iterations=iterations,
        converged=converged,
        trace=trace,
    )
