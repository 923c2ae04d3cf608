"""Command-line entry point wiring generation, testing, and experiments.

Commands are pure functions of (config, input files): identical invocations
produce byte-identical outputs. Structured results go to JSON, plot data to
CSV, and every file is written atomically (temp then rename).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bound as bound_mod
from . import rng
from .configs import (
    ConfigError,
    GeneratorConfig,
    RunConfig,
    config_to_dict,
    from_mapping,
)
from .datagen import LabeledPool, generate, load_pool, save_points
from .kernel import (
    build_kernel_stack,
    estimate_degrees,
    export_matrix_csv,
    reference_columns,
    reference_columns_from_matrix,
)
from .permtest import (
    default_lambda,
    make_full_evaluator,
    make_reference_evaluator,
    permutation_test,
    power_curve,
)
from .refselect import optimize_weights, select_random, select_with_coverage
from .spectral import decompose, energy_curve
from .statistic import mmd_full, mmd_reference, uniform_reference, witness

def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_json(path: Path, obj) -> None:
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        # shortest decimal that round-trips float64 exactly
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt_cell(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _write_points_atomic(points: np.ndarray, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    save_points(points, tmp)
    os.replace(tmp, path)


# --------------------------------------------------------------------------
# command implementations


def cmd_generate(cfg: RunConfig, out: Path) -> None:
    if cfg.generator is None:
        raise ConfigError("generate needs a generator config")
    pool = generate(cfg.generator)
    _write_points_atomic(pool.x.points, out / "X.csv")
    _write_points_atomic(pool.y.points, out / "Y.csv")
    write_json(
        out / "meta.json",
        {
            "generator": config_to_dict(cfg.generator),
            "n": pool.n,
            "m": pool.m,
            "dim": pool.dim,
        },
    )


def _statistic_record(kind, value_sq, tau, pool, r_count, seed):
    return {
        "statistic_kind": kind,
        "value_sq": float(value_sq),
        "tau": float(tau),
        "n": pool.n,
        "m": pool.m,
        "r_count": r_count,
        "seed": seed,
    }


def _load_or_generate_pool(cfg: RunConfig) -> LabeledPool:
    if cfg.input_x is not None or cfg.input_y is not None:
        if cfg.input_x is None or cfg.input_y is None:
            raise ConfigError("need both --x and --y input files")
        return load_pool(cfg.input_x, cfg.input_y, header=cfg.csv_header)
    if cfg.generator is None:
        raise ConfigError("test needs input files or a generator config")
    return generate(cfg.generator)


def cmd_test(cfg: RunConfig, out: Path) -> None:
    """Full pipeline: kernel, reference selection, weights, permutation test."""
    pool = _load_or_generate_pool(cfg)
    exact = cfg.mode == "exact"
    seed = cfg.seed

    sel_cfg = dataclasses.replace(cfg.select, seed=rng.derive_seed(seed, 1))
    stack = basis = None
    if exact:
        stack = build_kernel_stack(pool, cfg.kernel)
        if sel_cfg.method == "coverage":
            cov = select_with_coverage(pool, cfg.kernel, sel_cfg)
            refs_idx, saturated = cov.indices, cov.saturated
        else:
            refs_idx = select_random(pool, sel_cfg.initial_size, sel_cfg.seed)
            saturated = False
        columns = reference_columns_from_matrix(stack.base, refs_idx)
    else:
        if sel_cfg.method == "coverage":
            cov = select_with_coverage(pool, cfg.kernel, sel_cfg)
            refs_idx, columns, saturated = cov.indices, cov.columns, cov.saturated
        else:
            refs_idx = select_random(pool, sel_cfg.initial_size, sel_cfg.seed)
            columns = reference_columns(pool, cfg.kernel, refs_idx)
            saturated = False
    degrees = estimate_degrees(columns, pool.size)

    opt_cfg = cfg.optimize
    if opt_cfg.lam is None:
        if exact:
            lam, lam_source = default_lambda(stack), "spectrum-kept-40"
        else:
            lam, lam_source = 0.5, "default-constant"
        opt_cfg = dataclasses.replace(opt_cfg, lam=lam)
    else:
        lam_source = "config"

    if exact:
        opt = optimize_weights(pool, refs_idx, opt_cfg, stack=stack)
    else:
        opt = optimize_weights(pool, refs_idx, opt_cfg, columns=columns)
    refs_uniform = uniform_reference(refs_idx)
    refs_weighted = opt.reference_set

    records = []
    evaluators = {
        "reference-uniform": make_reference_evaluator(columns),
        "reference-weighted": make_reference_evaluator(
            columns, refs_weighted.weights
        ),
    }
    if exact:
        mmd_sq, tau = mmd_full(stack, pool)
        records.append(_statistic_record("full", mmd_sq, tau, pool, None, seed))
        evaluators["full"] = make_full_evaluator(stack)
    ref_u_sq = mmd_reference(columns, pool, refs_uniform, weighted=True)
    records.append(
        _statistic_record(
            "reference-uniform",
            ref_u_sq,
            np.sqrt(max(ref_u_sq, 0.0)),
            pool,
            refs_idx.size,
            seed,
        )
    )
    ref_w_sq = mmd_reference(columns, pool, refs_weighted, weighted=True)
    records.append(
        _statistic_record(
            "reference-weighted",
            ref_w_sq,
            np.sqrt(max(ref_w_sq, 0.0)),
            pool,
            refs_idx.size,
            seed,
        )
    )

    kind = cfg.permtest.statistic_kind
    if kind == "full" and not exact:
        raise ConfigError("full-MMD permutation test requires exact mode")
    perm_cfg = dataclasses.replace(cfg.permtest, seed=rng.derive_seed(seed, 2))
    perm = permutation_test(pool, evaluators[kind], perm_cfg)

    report = {
        "mode": cfg.mode,
        "seed": seed,
        "statistics": records,
        "permutation_test": {
            "statistic_kind": kind,
            "p_value": perm.p_value,
            "reject": perm.reject,
            "observed": perm.observed,
            "alpha": cfg.permtest.alpha,
            "num_permutations": cfg.permtest.num_permutations,
        },
        "reference": {
            "method": sel_cfg.method,
            "indices": [int(i) for i in refs_idx],
            "weights": [float(w) for w in refs_weighted.weights],
            "saturated": saturated,
            "degree_estimate_mean": float(degrees.base.mean()),
        },
        "optimize": {
            "lam": opt_cfg.lam,
            "lam_source": lam_source,
            "eps_paper": opt_cfg.eps_paper,
            "iterations": opt.iterations,
            "converged": opt.converged,
            "final_objective": opt.objective,
        },
    }
    if "json" in cfg.formats:
        write_json(out / "test_report.json", report)
    if "csv" in cfg.formats:
        write_csv(
            out / "optimize_trace.csv",
            ["iter", "J", "quad_term", "a_norm2", "step_size"],
            [
                (r.iteration, r.objective, r.quad_term, r.a_norm2, r.step_size)
                for r in opt.trace
            ],
        )

    if exact:
        basis = decompose(stack)
        rep = bound_mod.evaluate_bound(stack, pool, refs_weighted, basis, opt_cfg.lam)
        bound_json = {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in dataclasses.asdict(rep).items()
        }
        bound_json["available"] = True
    else:
        bound_json = {
            "available": False,
            "reason": "bound evaluation needs the full kernel stack (exact mode)",
        }
    if "json" in cfg.formats:
        write_json(out / "bound_report.json", bound_json)

    if cfg.dump_kernel:
        if exact:
            tmp = out / "base_kernel.csv.tmp"
            export_matrix_csv(stack.base, tmp)
            os.replace(tmp, out / "base_kernel.csv")
        else:
            tmp = out / "reference_columns.csv.tmp"
            export_matrix_csv(columns.matrix, tmp)
            os.replace(tmp, out / "reference_columns.csv")


def cmd_power(cfg: RunConfig, out: Path) -> None:
    if cfg.generator is None:
        raise ConfigError("power needs a generator config")
    curve = power_curve(
        cfg.generator,
        cfg.power.deltas,
        cfg.power.trials,
        cfg.permtest,
        cfg.power.variants,
        cfg.kernel,
        select_cfg=cfg.select,
        optimize_cfg=cfg.optimize,
        master_seed=cfg.seed,
    )
    if "csv" in cfg.formats:
        write_csv(
            out / "power.csv",
            ["delta", "variant", "trials", "rejections", "power"],
            [
                (c.delta, c.variant, c.trials, c.rejections, c.power)
                for c in curve.cells
            ],
        )
    if "json" in cfg.formats:
        write_json(
            out / "power_summary.json",
            {
                "cells": [dataclasses.asdict(c) for c in curve.cells],
                "generator": config_to_dict(cfg.generator),
                "kernel": config_to_dict(cfg.kernel),
                "seed": cfg.seed,
            },
        )


def cmd_spectra(cfg: RunConfig, out: Path) -> None:
    """Witness energy decay across the frequency cutoff, per shift value.

    The shifted two-Gaussian setup is expressed through the anomaly family:
    mixing probability 1 turns Y into a single Gaussian at the configured
    anomaly mean (shift, 0, ..., 0) with unit scale.
    """
    base_gen = cfg.generator or GeneratorConfig(
        family="gaussian-anomaly", n=200, m=200, dim=2
    )
    if base_gen.family != "gaussian-anomaly":
        raise ConfigError("spectra experiment uses the gaussian-anomaly family")
    dim = base_gen.resolved_dim
    summary = {"shifts": [], "seed": cfg.seed, "kernel": config_to_dict(cfg.kernel)}
    for si, shift in enumerate(cfg.spectra.shifts):
        mean = tuple([float(shift)] + [0.0] * (dim - 1))
        per_kept: dict[int, list] = {}
        for trial in range(cfg.spectra.trials):
            gen = dataclasses.replace(
                base_gen,
                shift=1.0,
                anomaly_mean=mean,
                anomaly_scale=1.0,
                seed=rng.derive_seed(cfg.seed, si, trial),
            )
            pool = generate(gen)
            stack = build_kernel_stack(pool, cfg.kernel)
            mmd_sq, tau = mmd_full(stack, pool)
            f = witness(stack, pool)
            basis = decompose(stack)
            grid = [k for k in cfg.spectra.kept_grid if k <= pool.size]
            for rep in energy_curve(basis, f, tau, grid):
                per_kept.setdefault(rep.kept_count, []).append(rep)
        rows = []
        for kept in sorted(per_kept):
            reps = per_kept[kept]
            rows.append(
                (
                    kept,
                    float(np.mean([r.lam for r in reps])),
                    float(np.mean([r.eps_paper for r in reps])),
                    float(np.mean([r.eps_relative for r in reps])),
                    float(np.mean([r.tau_eps for r in reps])),
                )
            )
        name = f"spectra_shift_{shift:g}.csv"
        if "csv" in cfg.formats:
            write_csv(
                out / name,
                ["kept_count", "lambda", "eps_paper", "eps_relative", "tau_eps"],
                rows,
            )
        summary["shifts"].append(
            {
                "shift": float(shift),
                "file": name,
                "trials": cfg.spectra.trials,
                "rows": [
                    dict(
                        zip(
                            (
                                "kept_count",
                                "lambda",
                                "eps_paper",
                                "eps_relative",
                                "tau_eps",
                            ),
                            row,
                        )
                    )
                    for row in rows
                ],
            }
        )
    if "json" in cfg.formats:
        write_json(out / "spectra.json", summary)


def cmd_bound_curve(cfg: RunConfig, out: Path) -> None:
    if cfg.generator is None:
        raise ConfigError("bound-curve needs a generator config")
    pool = generate(cfg.generator)
    stack = build_kernel_stack(pool, cfg.kernel)
    curve = bound_mod.bound_vs_size_curve(
        stack,
        pool,
        cfg.bound_curve.sizes,
        cfg.bound_curve.draws_per_size,
        seed=cfg.seed,
    )
    if "csv" in cfg.formats:
        write_csv(
            out / "bound_curve.csv",
            ["r_size", "draw", "quadrature_term", "a_norm", "deviation", "total_bound"],
            [
                (r.r_size, r.draw, r.quadrature_term, r.a_norm, r.deviation, r.total_bound)
                for r in curve.rows
            ],
        )
    if "json" in cfg.formats:
        write_json(
            out / "bound_curve_summary.json",
            {
                "summaries": [dataclasses.asdict(s) for s in curve.summaries],
                "generator": config_to_dict(cfg.generator),
                "kernel": config_to_dict(cfg.kernel),
                "seed": cfg.seed,
            },
        )


COMMANDS = {
    "generate": cmd_generate,
    "test": cmd_test,
    "power": cmd_power,
    "spectra": cmd_spectra,
    "bound-curve": cmd_bound_curve,
}

# experiment presets; values merge over the loaded config
PRESETS = {
    "fig2": {
        "generator": {
            "family": "gaussian-anomaly",
            "n": 200,
            "m": 200,
            "dim": 5,
        },
        "kernel": {"kind": "gaussian", "bandwidth": 0.5},
        "select": {"method": "random", "initial_size": 25},
        "permtest": {"num_permutations": 200, "alpha": 0.05},
        "power": {
            "deltas": [0.0, 0.05, 0.1, 0.15, 0.2],
            "trials": 100,
            "variants": ["full", "reference-uniform", "reference-weighted"],
        },
    },
    "fig1": {
        "generator": {"family": "gaussian-anomaly", "n": 200, "m": 200, "dim": 2},
        "kernel": {"kind": "gaussian", "bandwidth": 0.5},
        "spectra": {
            "shifts": [0.0, 0.5, 1.0],
            "trials": 20,
            "kept_grid": [1, 2, 5, 10, 20, 40, 80, 160],
        },
    },
    "decay": {
        "generator": {
            "family": "gaussian-anomaly",
            "shift": 0.1,
            "n": 100,
            "m": 100,
            "dim": 5,
        },
        "kernel": {"kind": "gaussian", "bandwidth": 0.5},
        "bound_curve": {"sizes": [10, 25, 50, 100], "draws_per_size": 50},
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refmmd",
        description="Weighted reference-point MMD two-sample testing toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON RunConfig file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--mode", choices=("exact", "reference-only"))
        p.add_argument(
            "--format",
            action="append",
            choices=("csv", "json"),
            help="output format; repeatable (overrides config)",
        )
        if name in ("power", "spectra", "bound-curve"):
            p.add_argument("--preset", choices=sorted(PRESETS))
        if name == "test":
            p.add_argument("--x", help="X point-cloud CSV")
            p.add_argument("--y", help="Y point-cloud CSV")
            p.add_argument("--header", action="store_true", help="skip CSV header row")
            p.add_argument("--dump-kernel", action="store_true")
    return parser


def _merge_over(base: dict, override: dict) -> dict:
    """Override wins; sub-config dicts merge one level deep."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            sub = dict(merged[key])
            sub.update(value)
            merged[key] = sub
        else:
            merged[key] = value
    return merged


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Precedence: dataclass defaults < preset < config file < flags."""
    raw: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
    preset = getattr(args, "preset", None)
    if preset:
        raw = _merge_over(PRESETS[preset], raw)
    cfg = from_mapping(RunConfig, raw, name=args.config or "RunConfig")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.format:
        overrides["formats"] = tuple(dict.fromkeys(args.format))
    if getattr(args, "x", None) is not None:
        overrides["input_x"] = args.x
    if getattr(args, "y", None) is not None:
        overrides["input_y"] = args.y
    if getattr(args, "header", False):
        overrides["csv_header"] = True
    if getattr(args, "dump_kernel", False):
        overrides["dump_kernel"] = True
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return dataclasses.replace(cfg, command=args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out)
        return 0
    except Exception as exc:  # single-line machine-parsable error contract
        print(
            json.dumps({"error": str(exc), "type": type(exc).__name__}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
