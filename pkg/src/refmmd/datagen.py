"""Seeded synthetic two-sample families and point-cloud I/O.

Three families mirror the power experiments this package reproduces:

* ``gaussian-anomaly``: X standard normal, Y the same with a small
  anomalous cluster mixed in with probability ``shift``.
* ``sphere-shift``: X uniform on the unit sphere, Y the same with the
  first coordinate stretched by (1 + shift).
* ``mixture3d``: three anisotropic Gaussian clouds, Y with each component
  mean displaced by ``shift`` along that component's thinnest axis.

Generators are pure functions of their config; equal configs give
bit-identical pools.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .configs import ConfigError, GeneratorConfig


class DataError(ValueError):
    """Invalid point-cloud content or file format."""


@dataclass(frozen=True)
class PointCloud:
    """A (count x dim) array of finite float64 coordinates."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataError("points must be a (count x dim) array with count, dim >= 1")
        if not np.all(np.isfinite(pts)):
            raise DataError("points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class LabeledPool:
    """Two samples stacked into one pool.

    Pooled indices 0..n-1 are X and n..n+m-1 are Y. Construction allows
    n, m >= 1 so degenerate single-point pools remain expressible for
    sanity checks; the permutation-test module enforces n, m >= 2.
    """

    x: PointCloud
    y: PointCloud

    def __post_init__(self) -> None:
        if self.x.dim != self.y.dim:
            raise DataError(
                f"dimension mismatch: x has dim {self.x.dim}, y has dim {self.y.dim}"
            )

    @property
    def n(self) -> int:
        return self.x.count

    @property
    def m(self) -> int:
        return self.y.count

    @property
    def size(self) -> int:
        return self.n + self.m

    @property
    def dim(self) -> int:
        return self.x.dim

    def pooled(self) -> np.ndarray:
        """The (n+m) x dim stacked coordinate array."""
        return np.vstack([self.x.points, self.y.points])

    def x_indices(self) -> np.ndarray:
        return np.arange(self.n)

    def y_indices(self) -> np.ndarray:
        return np.arange(self.n, self.size)


# Fixed component rotations for the mixture3d defaults. Each covariance is
# R @ diag(1, 0.1, 0.01) @ R.T, so the clouds share their axis lengths but
# not their orientations.
def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


MIXTURE_DEFAULT_MEANS = np.array([[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [0.0, 4.0, 0.0]])
MIXTURE_AXIS_VARIANCES = np.array([1.0, 0.1, 0.01])
MIXTURE_DEFAULT_ROTATIONS = (
    np.eye(3),
    _rot_z(np.pi / 3.0),
    _rot_x(np.pi / 4.0) @ _rot_z(-np.pi / 3.0),
)


def mixture_default_covariances() -> np.ndarray:
    """The three default component covariances (3 x 3 x 3)."""
    a = np.diag(MIXTURE_AXIS_VARIANCES)
    return np.stack([r @ a @ r.T for r in MIXTURE_DEFAULT_ROTATIONS])


def mixture_default_shift_directions() -> np.ndarray:
    """Default displacement directions: each component's thinnest axis."""
    e3 = np.array([0.0, 0.0, 1.0])
    return np.stack([r @ e3 for r in MIXTURE_DEFAULT_ROTATIONS])


def _smallest_axis(cov: np.ndarray) -> np.ndarray:
    """Unit eigenvector of the smallest eigenvalue, sign-fixed."""
    vals, vecs = np.linalg.eigh(cov)
    v = vecs[:, np.argmin(vals)]
    peak = np.argmax(np.abs(v))
    return -v if v[peak] < 0 else v


def generate(cfg: GeneratorConfig) -> LabeledPool:
    """Dispatch to the family generator named in the config."""
    if cfg.family == "gaussian-anomaly":
        return generate_gaussian_anomaly(cfg)
    if cfg.family == "sphere-shift":
        return generate_sphere_shift(cfg)
    return generate_mixture3d(cfg)


def generate_gaussian_anomaly(cfg: GeneratorConfig) -> LabeledPool:
    """X ~ N(0, I); Y mixes in N(anomaly_mean, anomaly_scale * I) w.p. shift."""
    if cfg.family != "gaussian-anomaly":
        raise ConfigError(f"config family is {cfg.family!r}, not gaussian-anomaly")
    if cfg.shift > 1.0:
        raise ConfigError("gaussian-anomaly shift is a probability; must be <= 1")
    dim = cfg.resolved_dim
    mean = (
        np.full(dim, 2.0)
        if cfg.anomaly_mean is None
        else np.asarray(cfg.anomaly_mean, dtype=np.float64)
    )
    if mean.shape != (dim,):
        raise ConfigError(f"anomaly_mean must have length {dim}")
    if not cfg.anomaly_scale > 0.0:
        raise ConfigError("anomaly_scale must be > 0")

    x = rng.stream(cfg.seed, rng.X_POINTS).standard_normal((cfg.n, dim))
    z = rng.stream(cfg.seed, rng.Y_POINTS).standard_normal((cfg.m, dim))
    anomalous = (
        rng.stream(cfg.seed, rng.COMPONENT_LABELS).random(cfg.m) < cfg.shift
    )
    y = np.where(anomalous[:, None], mean + np.sqrt(cfg.anomaly_scale) * z, z)
    return LabeledPool(PointCloud(x), PointCloud(y))


def generate_sphere_shift(cfg: GeneratorConfig) -> LabeledPool:
    """X uniform on the unit sphere; Y the same with axes (1+shift, 1, ..., 1)."""
    if cfg.family != "sphere-shift":
        raise ConfigError(f"config family is {cfg.family!r}, not sphere-shift")
    dim = cfg.resolved_dim

    def sphere_sample(generator: np.random.Generator, count: int) -> np.ndarray:
        g = generator.standard_normal((count, dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise DataError("degenerate zero vector while sampling the sphere")
        return g / norms

    x = sphere_sample(rng.stream(cfg.seed, rng.X_POINTS), cfg.n)
    y = sphere_sample(rng.stream(cfg.seed, rng.Y_POINTS), cfg.m)
    y[:, 0] *= 1.0 + cfg.shift
    return LabeledPool(PointCloud(x), PointCloud(y))


def generate_mixture3d(cfg: GeneratorConfig) -> LabeledPool:
    pool, _, _ = generate_mixture3d_labeled(cfg)
    return pool


def generate_mixture3d_labeled(
    cfg: GeneratorConfig,
) -> tuple[LabeledPool, np.ndarray, np.ndarray]:
    """Three-component anisotropic mixture, returning component labels too.

    X draws from the base mixture; Y from the same mixture with component c
    displaced by shift * direction_c. The default directions are each
    component's thinnest covariance axis; user-supplied covariances without
    explicit directions also get their smallest-eigenvalue axis.
    """
    if cfg.family != "mixture3d":
        raise ConfigError(f"config family is {cfg.family!r}, not mixture3d")
    if cfg.resolved_dim != 3:
        raise ConfigError("mixture3d requires dim == 3")

    means = (
        MIXTURE_DEFAULT_MEANS
        if cfg.mixture_means is None
        else np.asarray(cfg.mixture_means, dtype=np.float64)
    )
    if means.shape != (3, 3):
        raise ConfigError("mixture_means must be three 3-vectors")
    if cfg.mixture_covariances is None:
        covs = mixture_default_covariances()
    else:
        covs = np.asarray(cfg.mixture_covariances, dtype=np.float64)
        if covs.shape != (3, 3, 3):
            raise ConfigError("mixture_covariances must be three 3x3 matrices")
        if not np.allclose(covs, np.swapaxes(covs, 1, 2)):
            raise ConfigError("mixture covariances must be symmetric")
    if cfg.mixture_shift_directions is None:
        if cfg.mixture_covariances is None:
            dirs = mixture_default_shift_directions()
        else:
            dirs = np.stack([_smallest_axis(c) for c in covs])
    else:
        dirs = np.asarray(cfg.mixture_shift_directions, dtype=np.float64)
        if dirs.shape != (3, 3):
            raise ConfigError("mixture_shift_directions must be three 3-vectors")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(norms == 0.0):
            raise ConfigError("shift directions must be nonzero")
        dirs = dirs / norms[:, None]

    try:
        chols = np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise ConfigError("mixture covariances must be positive definite") from exc

    label_gen = rng.stream(cfg.seed, rng.COMPONENT_LABELS)
    labels_x = label_gen.integers(0, 3, size=cfg.n)
    labels_y = label_gen.integers(0, 3, size=cfg.m)

    def sample(generator, labels, component_means):
        z = generator.standard_normal((labels.size, 3))
        out = component_means[labels]
        out = out + np.einsum("nij,nj->ni", chols[labels], z)
        return out

    x = sample(rng.stream(cfg.seed, rng.X_POINTS), labels_x, means)
    shifted = means + cfg.shift * dirs
    y = sample(rng.stream(cfg.seed, rng.Y_POINTS), labels_y, shifted)
    pool = LabeledPool(PointCloud(x), PointCloud(y))
    return pool, labels_x, labels_y


def save_points(points: np.ndarray, path) -> None:
    """Write one point per row, comma-separated, 17 significant digits.

    17 digits round-trips float64 exactly, so save/load is lossless.
    """
    np.savetxt(path, np.atleast_2d(points), fmt="%.17g", delimiter=",")


def load_points(path, header: bool = False) -> np.ndarray:
    """Read a headerless (or --header) CSV point cloud."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if header:
        lines = lines[1:]
    if not lines:
        raise DataError(f"{path}: empty point-cloud file")
    rows = []
    width = None
    for i, line in enumerate(lines):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataError(
                f"{path}: row {i + 1} has {len(cells)} columns, expected {width}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise DataError(f"{path}: non-numeric cell in row {i + 1}") from exc
    return np.asarray(rows, dtype=np.float64)


def load_pool(path_x, path_y, header: bool = False) -> LabeledPool:
    """Load X and Y point clouds; column counts must agree."""
    x = load_points(path_x, header=header)
    y = load_points(path_y, header=header)
    if x.shape[1] != y.shape[1]:
        raise DataError(
            f"dimension mismatch: {path_x} has {x.shape[1]} columns, "
            f"{path_y} has {y.shape[1]}"
        )
    return LabeledPool(PointCloud(x), PointCloud(y))
