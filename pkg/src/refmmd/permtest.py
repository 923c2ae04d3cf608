"""Permutation tests and power-curve experiments.

A permutation relabels the pooled points into new (n, m) splits; the
kernel, the reference set, and the weights all stay fixed, since none of
them use the labels. The smoothed p-value (1 + #{permuted >= observed})
/ (1 + B) is exact under exchangeability.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng
from .configs import (
    GeneratorConfig,
    KernelSpec,
    OptimizeConfig,
    PermTestConfig,
    SelectConfig,
)
from .datagen import LabeledPool, generate
from .kernel import (
    KernelStack,
    ReferenceColumns,
    build_kernel_stack,
    reference_columns_from_matrix,
)
from .refselect import optimize_weights, select_random, select_with_coverage
from .statistic import ReferenceSet, StatisticError, uniform_reference

Evaluator = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class PermTestResult:
    p_value: float
    reject: bool
    observed: float
    permuted: np.ndarray
    splits: np.ndarray  # (B, n+m) permutations actually used


def make_full_evaluator(stack: KernelStack) -> Evaluator:
    """Full walk-kernel MMD^2 as a function of a relabeling."""
    K = stack.walk

    def evaluate(x_idx: np.ndarray, y_idx: np.ndarray) -> float:
        s = np.zeros(K.shape[0])
        s[x_idx] = 1.0 / x_idx.size
        s[y_idx] = -1.0 / y_idx.size
        return float(s @ (K @ s))

    return evaluate


def make_reference_evaluator(
    columns: ReferenceColumns, weights: np.ndarray | None = None
) -> Evaluator:
    """Reference-point MMD^2 with fixed columns and (optional) weights."""
    kr = columns.matrix
    if weights is None:
        weights = np.full(columns.count, 1.0 / columns.count)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.size != columns.count:
            raise StatisticError("weight length does not match reference count")

    def evaluate(x_idx: np.ndarray, y_idx: np.ndarray) -> float:
        root = np.sqrt(x_idx.size + y_idx.size)
        g = (
            root / x_idx.size * kr[x_idx, :].sum(axis=0)
            - root / y_idx.size * kr[y_idx, :].sum(axis=0)
        )
        return float(weights @ g**2)

    return evaluate


def permutation_test(
    pool: LabeledPool, evaluator: Evaluator, cfg: PermTestConfig
) -> PermTestResult:
    """Two-sample permutation test for a fixed statistic evaluator."""
    if pool.n < 2 or pool.m < 2:
        raise StatisticError("permutation test needs n >= 2 and m >= 2")
    n, total = pool.n, pool.size
    observed = evaluator(pool.x_indices(), pool.y_indices())
    g = rng.stream(cfg.seed, rng.PERMUTATIONS)
    b = cfg.num_permutations
    permuted = np.empty(b)
    splits = np.empty((b, total), dtype=np.intp)
    for i in range(b):
        perm = g.permutation(total)
        splits[i] = perm
        permuted[i] = evaluator(perm[:n], perm[n:])
    p_value = (1.0 + np.count_nonzero(permuted >= observed)) / (1.0 + b)
    return PermTestResult(
        p_value=float(p_value),
        reject=bool(p_value <= cfg.alpha),
        observed=float(observed),
        permuted=permuted,
        splits=splits,
    )


@dataclass(frozen=True)
class PowerCell:
    """One (delta, variant) summary of a power sweep."""

    delta: float
    variant: str
    trials: int
    rejections: int
    power: float
    mean_abs_deviation: float | None  # mean |stat^2 - full^2|; None for full


@dataclass(frozen=True)
class PowerCurve:
    cells: list[PowerCell]
    deltas: tuple[float, ...]
    variants: tuple[str, ...]
    trials: int
    generator: GeneratorConfig
    kernel: KernelSpec


def default_lambda(stack: KernelStack, kept: int = 40) -> float:
    """Cutoff at the |eigenvalue| of the first dropped position.

    Derived from the lazy-walk spectrum only, so it carries no label
    information and is safe to fix before permuting.
    """
    vals = np.sort(np.abs(np.linalg.eigvalsh(stack.lazy)))[::-1]
    kept = min(kept, vals.size - 1)
    lam = float(vals[kept])
    if lam <= 0.0 or lam >= vals[0]:
        lam = 0.5 * float(vals[0])
    return lam


def power_curve(
    gen_cfg: GeneratorConfig,
    deltas,
    trials: int,
    perm_cfg: PermTestConfig,
    variants,
    kernel_spec: KernelSpec,
    select_cfg: SelectConfig | None = None,
    optimize_cfg: OptimizeConfig | None = None,
    master_seed: int = 0,
) -> PowerCurve:
    """Rejection probability per shift value for each statistic variant.

    Per trial: generate the pool at the given shift, build the kernel
    stack, fix the reference set and weights without touching labels, then
    run one shared set of permutations through every variant's evaluator.
    All seeds are counter-based in (delta index, trial).
    """
    deltas = tuple(float(d) for d in deltas)
    variants = tuple(variants)
    select_cfg = select_cfg or SelectConfig()
    optimize_cfg = optimize_cfg or OptimizeConfig()
    needs_refs = any(v != "full" for v in variants)
    needs_weights = "reference-weighted" in variants

    rejections = {(d, v): 0 for d in deltas for v in variants}
    deviations = {(d, v): [] for d in deltas for v in variants}

    for di, delta in enumerate(deltas):
        for trial in range(trials):
            pool_seed = rng.derive_seed(master_seed, di, trial, 0)
            cfg = dataclasses.replace(gen_cfg, shift=delta, seed=pool_seed)
            pool = generate(cfg)
            stack = build_kernel_stack(pool, kernel_spec)

            evaluators: dict[str, Evaluator] = {}
            full_eval = make_full_evaluator(stack)
            if "full" in variants:
                evaluators["full"] = full_eval
            if needs_refs:
                sel_seed = rng.derive_seed(master_seed, di, trial, 1)
                if select_cfg.method == "coverage":
                    cov = select_with_coverage(
                        pool, kernel_spec, dataclasses.replace(select_cfg, seed=sel_seed)
                    )
                    refs_idx = cov.indices
                else:
                    refs_idx = select_random(pool, select_cfg.initial_size, sel_seed)
                columns = reference_columns_from_matrix(stack.base, refs_idx)
                if "reference-uniform" in variants:
                    evaluators["reference-uniform"] = make_reference_evaluator(columns)
                if needs_weights:
                    ocfg = optimize_cfg
                    if ocfg.lam is None:
                        ocfg = dataclasses.replace(
                            ocfg, lam=default_lambda(stack)
                        )
                    opt = optimize_weights(pool, refs_idx, ocfg, stack=stack)
                    evaluators["reference-weighted"] = make_reference_evaluator(
                        columns, opt.reference_set.weights
                    )

            perm_seed = rng.derive_seed(master_seed, di, trial, 2)
            pcfg = dataclasses.replace(perm_cfg, seed=perm_seed)
            full_observed = full_eval(pool.x_indices(), pool.y_indices())
            # one shared permutation set per trial keeps the variants
            # comparable and the run deterministic
            for variant in variants:
                result = permutation_test(pool, evaluators[variant], pcfg)
                if result.reject:
                    rejections[(delta, variant)] += 1
                if variant != "full":
                    deviations[(delta, variant)].append(
                        abs(result.observed - full_observed)
                    )

    cells = []
    for delta in deltas:
        for variant in variants:
            devs = deviations[(delta, variant)]
            cells.append(
                PowerCell(
                    delta=delta,
                    variant=variant,
                    trials=trials,
                    rejections=rejections[(delta, variant)],
                    power=rejections[(delta, variant)] / trials,
                    mean_abs_deviation=float(np.mean(devs)) if devs else None,
                )
            )
    return PowerCurve(
        cells=cells,
        deltas=deltas,
        variants=variants,
        trials=trials,
        generator=gen_cfg,
        kernel=kernel_spec,
    )
