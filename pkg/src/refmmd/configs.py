"""Configuration dataclasses and strict JSON loading.

All configs are frozen dataclasses. JSON documents map 1:1 onto fields;
unknown keys are an error so typos never silently change an experiment.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

GENERATOR_FAMILIES = ("gaussian-anomaly", "sphere-shift", "mixture3d")
KERNEL_KINDS = ("gaussian", "local-covariance")
SELECT_METHODS = ("random", "coverage")
STATISTIC_KINDS = ("full", "reference-uniform", "reference-weighted")
MODES = ("exact", "reference-only")

FAMILY_DEFAULT_DIM = {"gaussian-anomaly": 5, "sphere-shift": 5, "mixture3d": 3}


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def _as_tuple(value: Any) -> Any:
    """Recursively convert lists to tuples so frozen configs stay hashable."""
    if isinstance(value, (list, tuple)):
        return tuple(_as_tuple(v) for v in value)
    return value


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters for one synthetic two-sample draw.

    ``shift`` is the family's separation parameter: the anomaly mixing
    probability for gaussian-anomaly, the axis stretch for sphere-shift,
    and the per-component mean displacement for mixture3d.
    """

    family: str
    shift: float = 0.0
    n: int = 200
    m: int = 200
    dim: int | None = None  # None -> family default (5, 5, 3)
    seed: int = 0
    # gaussian-anomaly table; anomaly_mean defaults to (2, ..., 2)
    anomaly_mean: tuple[float, ...] | None = None
    anomaly_scale: float = 0.1
    # mixture3d table; None -> documented defaults (see datagen)
    mixture_means: tuple[tuple[float, float, float], ...] | None = None
    mixture_covariances: tuple[tuple[tuple[float, ...], ...], ...] | None = None
    mixture_shift_directions: tuple[tuple[float, float, float], ...] | None = None

    def __post_init__(self) -> None:
        if self.family not in GENERATOR_FAMILIES:
            raise ConfigError(f"unknown generator family {self.family!r}")
        if not self.shift >= 0.0:
            raise ConfigError("shift must be >= 0")
        if self.n < 2 or self.m < 2:
            raise ConfigError("n and m must be >= 2")
        if self.dim is not None and self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        object.__setattr__(self, "anomaly_mean", _as_tuple(self.anomaly_mean))
        object.__setattr__(self, "mixture_means", _as_tuple(self.mixture_means))
        object.__setattr__(
            self, "mixture_covariances", _as_tuple(self.mixture_covariances)
        )
        object.__setattr__(
            self, "mixture_shift_directions", _as_tuple(self.mixture_shift_directions)
        )

    @property
    def resolved_dim(self) -> int:
        return self.dim if self.dim is not None else FAMILY_DEFAULT_DIM[self.family]


@dataclass(frozen=True)
class KernelSpec:
    """Base kernel choice: isotropic gaussian or local-covariance variant."""

    kind: str = "gaussian"
    bandwidth: float = 0.5
    knn: int = 16  # local-covariance only
    regularizer: float = 1e-6  # local-covariance only

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if not self.bandwidth > 0.0:
            raise ConfigError("bandwidth must be > 0")
        if self.knn < 1:
            raise ConfigError("knn must be >= 1")
        if not self.regularizer > 0.0:
            raise ConfigError("regularizer must be > 0")


@dataclass(frozen=True)
class SelectConfig:
    """Reference-point selection: random subset or coverage augmentation."""

    method: str = "random"
    initial_size: int = 25
    coverage_threshold: float = 0.5
    max_additions: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in SELECT_METHODS:
            raise ConfigError(f"unknown select method {self.method!r}")
        if self.initial_size < 1:
            raise ConfigError("initial_size must be >= 1")
        if self.coverage_threshold < 0.0:
            raise ConfigError("coverage_threshold must be >= 0")
        if self.max_additions < 0:
            raise ConfigError("max_additions must be >= 0")


@dataclass(frozen=True)
class OptimizeConfig:
    """Weight-optimization parameters.

    ``lam`` and ``eps_paper`` are the frequency threshold and residual
    fraction weighting the two objective terms; both are fixed ahead of the
    optimization and carry no label information. ``lam`` may be left None
    in file configs, in which case the pipeline derives it from the lazy
    walk spectrum before optimizing. The default ``eps_paper`` sits at the
    conservative end: on the synthetic families the witness carries most of
    its norm above any 40-eigenvector cutoff, so a spread-dominant
    objective is the faithful regime and keeps the optimized weights close
    to the uniform floor.
    """

    lam: float | None = None
    eps_paper: float = 0.9
    max_iters: int = 500
    step_init: float = 1.0
    tolerance: float = 1e-12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lam is not None and not self.lam > 0.0:
            raise ConfigError("lam must be > 0")
        if not 0.0 <= self.eps_paper <= 1.0:
            raise ConfigError("eps_paper must lie in [0, 1]")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.step_init > 0.0:
            raise ConfigError("step_init must be > 0")
        if not self.tolerance > 0.0:
            raise ConfigError("tolerance must be > 0")


@dataclass(frozen=True)
class PermTestConfig:
    """Permutation-test parameters. 200 permutations is the default."""

    num_permutations: int = 200
    alpha: float = 0.05
    seed: int = 0
    statistic_kind: str = "full"

    def __post_init__(self) -> None:
        if self.num_permutations < 1:
            raise ConfigError("num_permutations must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.statistic_kind not in STATISTIC_KINDS:
            raise ConfigError(f"unknown statistic kind {self.statistic_kind!r}")


@dataclass(frozen=True)
class PowerConfig:
    """Shift grid and trial count for a power sweep."""

    deltas: tuple[float, ...] = (0.0, 0.05, 0.1, 0.15, 0.2)
    trials: int = 100
    variants: tuple[str, ...] = ("full", "reference-uniform", "reference-weighted")

    def __post_init__(self) -> None:
        object.__setattr__(self, "deltas", _as_tuple(self.deltas))
        object.__setattr__(self, "variants", _as_tuple(self.variants))
        if len(self.deltas) < 1:
            raise ConfigError("deltas must be non-empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for v in self.variants:
            if v not in STATISTIC_KINDS:
                raise ConfigError(f"unknown statistic kind {v!r}")


@dataclass(frozen=True)
class SpectraConfig:
    """Kept-count grid and shift grid for the energy-decay experiment."""

    shifts: tuple[float, ...] = (0.0, 0.5, 1.0)
    trials: int = 20
    kept_grid: tuple[int, ...] = (1, 2, 5, 10, 20, 40, 80, 160)

    def __post_init__(self) -> None:
        object.__setattr__(self, "shifts", _as_tuple(self.shifts))
        object.__setattr__(self, "kept_grid", _as_tuple(self.kept_grid))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if any(k < 1 for k in self.kept_grid):
            raise ConfigError("kept_grid entries must be >= 1")


@dataclass(frozen=True)
class BoundCurveConfig:
    """Reference-set sizes and draws for the deviation-decay experiment."""

    sizes: tuple[int, ...] = (10, 25, 50, 100)
    draws_per_size: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", _as_tuple(self.sizes))
        if any(s < 1 for s in self.sizes):
            raise ConfigError("sizes must be >= 1")
        if self.draws_per_size < 1:
            raise ConfigError("draws_per_size must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    """Top-level CLI configuration; sub-configs validate themselves."""

    command: str | None = None
    seed: int = 0
    out_dir: str = "out"
    mode: str = "exact"
    formats: tuple[str, ...] = ("csv", "json")
    input_x: str | None = None
    input_y: str | None = None
    csv_header: bool = False
    dump_kernel: bool = False
    generator: GeneratorConfig | None = None
    kernel: KernelSpec = field(default_factory=KernelSpec)
    select: SelectConfig = field(default_factory=SelectConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    permtest: PermTestConfig = field(default_factory=PermTestConfig)
    power: PowerConfig = field(default_factory=PowerConfig)
    spectra: SpectraConfig = field(default_factory=SpectraConfig)
    bound_curve: BoundCurveConfig = field(default_factory=BoundCurveConfig)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "formats", _as_tuple(self.formats))
        for f in self.formats:
            if f not in ("csv", "json"):
                raise ConfigError(f"unknown output format {f!r}")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")


_SUBCONFIG_TYPES = {
    "generator": GeneratorConfig,
    "kernel": KernelSpec,
    "select": SelectConfig,
    "optimize": OptimizeConfig,
    "permtest": PermTestConfig,
    "power": PowerConfig,
    "spectra": SpectraConfig,
    "bound_curve": BoundCurveConfig,
}


def from_mapping(cls: type, data: dict, name: str | None = None):
    """Build a config dataclass from a plain mapping, rejecting unknown keys."""
    name = name or cls.__name__
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        sub = _SUBCONFIG_TYPES.get(key)
        if cls is RunConfig and sub is not None and value is not None:
            kwargs[key] = from_mapping(sub, value, name=key)
        else:
            kwargs[key] = _as_tuple(value)
    return cls(**kwargs)


def load_run_config(path: str | Path) -> RunConfig:
    """Load a RunConfig JSON document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_mapping(RunConfig, data, name=str(path))


def load_generator_config(path: str | Path) -> GeneratorConfig:
    """Load a GeneratorConfig JSON document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_mapping(GeneratorConfig, data, name=str(path))


def config_to_dict(cfg) -> dict:
    """Dataclass config -> JSON-serializable dict (tuples become lists)."""

    def convert(value):
        if dataclasses.is_dataclass(value) and not isinstance(value, type):
            return {
                f.name: convert(getattr(value, f.name))
                for f in dataclasses.fields(value)
            }
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        return value

    return convert(cfg)
