"""Eigendecompositions, witness projections, and energy diagnostics.

The witness vector concentrates most of its energy on the low-frequency
(large |eigenvalue|) eigenvectors of the lazy-walk matrix. The residual
fraction is reported two ways, because the scale it should be measured
against is genuinely ambiguous:

* ``eps_paper``  = 1 - ||projection|| / tau, the reading used by the error
  bound (tau is the full MMD);
* ``eps_relative`` = ||residual|| / ||f||, the plain orthogonal-projection
  fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import LabeledPool
from .kernel import KernelStack
from .statistic import WitnessVector

SOURCE_LAZY = "lazy-walk"
SOURCE_WALK = "walk-kernel"


class SpectralError(ValueError):
    """Invalid spectral inputs."""


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs sorted by descending |eigenvalue|, deterministic signs.

    Sign convention: the largest-magnitude entry of each eigenvector is
    positive, ties broken by the lowest index, so fixtures are stable
    across eigensolver backends.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    source: str

    @property
    def size(self) -> int:
        return self.eigenvalues.size


def decompose(stack: KernelStack, source: str = SOURCE_LAZY) -> SpectralBasis:
    """Full symmetric eigendecomposition of P (lazy-walk) or K (walk)."""
    if source == SOURCE_LAZY:
        matrix = stack.lazy
    elif source == SOURCE_WALK:
        matrix = stack.walk
    else:
        raise SpectralError(f"unknown decomposition source {source!r}")
    vals, vecs = np.linalg.eigh(matrix)
    order = np.argsort(-np.abs(vals), kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        peak = np.argmax(np.abs(vecs[:, j]))
        if vecs[peak, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return SpectralBasis(eigenvalues=vals, eigenvectors=vecs, source=source)


@dataclass(frozen=True)
class ProjectionReport:
    """Energy split of the witness across a frequency cutoff."""

    lam: float
    kept_count: int
    projected_norm: float
    residual_norm: float
    eps_paper: float
    eps_relative: float
    tau: float
    degenerate: bool = False

    @property
    def tau_eps(self) -> float:
        return self.tau * self.eps_paper


def _project_top(
    basis: SpectralBasis, f: np.ndarray, kept: int, lam: float, tau: float
) -> ProjectionReport:
    phi = basis.eigenvectors[:, :kept]
    f_low = phi @ (phi.T @ f) if kept > 0 else np.zeros_like(f)
    projected = float(np.linalg.norm(f_low))
    residual = float(np.linalg.norm(f - f_low))
    f_norm = float(np.linalg.norm(f))
    degenerate = kept == 0 or tau <= 0.0 or f_norm == 0.0
    eps_paper = 1.0 - projected / tau if tau > 0.0 else 1.0
    eps_relative = residual / f_norm if f_norm > 0.0 else 0.0
    return ProjectionReport(
        lam=float(lam),
        kept_count=int(kept),
        projected_norm=projected,
        residual_norm=residual,
        eps_paper=float(eps_paper),
        eps_relative=float(eps_relative),
        tau=float(tau),
        degenerate=degenerate,
    )


def project_witness(
    basis: SpectralBasis, f: WitnessVector, lam: float, tau: float
) -> ProjectionReport:
    """Project f onto eigenvectors with |eigenvalue| > lam.

    A lam that keeps nothing is flagged degenerate (eps_paper = 1), not
    fatal.
    """
    if lam < 0.0:
        raise SpectralError("lam must be >= 0")
    if f.size != basis.size:
        raise SpectralError("witness length does not match basis size")
    kept = int(np.count_nonzero(np.abs(basis.eigenvalues) > lam))
    return _project_top(basis, f.values, kept, lam, tau)


def energy_curve(
    basis: SpectralBasis, f: WitnessVector, tau: float, grid
) -> list[ProjectionReport]:
    """One projection report per kept-count in the grid.

    The reported lam is the implied threshold |eigenvalue| at the first
    dropped position (0 when everything is kept).
    """
    if f.size != basis.size:
        raise SpectralError("witness length does not match basis size")
    abs_vals = np.abs(basis.eigenvalues)
    reports = []
    for kept in grid:
        kept = int(kept)
        if kept < 1 or kept > basis.size:
            raise SpectralError(f"kept count {kept} outside 1..{basis.size}")
        lam = float(abs_vals[kept]) if kept < basis.size else 0.0
        reports.append(_project_top(basis, f.values, kept, lam, tau))
    return reports


@dataclass(frozen=True)
class TripleProductDiagnostic:
    """Expansion coefficients and product-energy retention table.

    ``pairs`` rows are (k, k', energy_fraction, degenerate); the fraction is
    the share of ||psi_k o psi_k'||^2 kept by the low-frequency projection,
    where o is the entrywise product.
    """

    c: np.ndarray
    diff: np.ndarray
    pairs: list[tuple[int, int, float, bool]]


def _lowest_frequency_pairs(budget: int, limit: int):
    """Enumerate (k, k') with k <= k' by increasing k + k', then k."""
    out = []
    total = 0
    while len(out) < budget and total <= 2 * (limit - 1):
        for k in range(total // 2 + 1):
            k2 = total - k
            if k2 < k or k2 >= limit:
                continue
            out.append((k, k2))
            if len(out) == budget:
                break
        total += 1
    return out


def triple_product_diagnostic(
    basis_walk: SpectralBasis,
    basis_lazy: SpectralBasis,
    pool: LabeledPool,
    lam: float,
    pair_budget: int = 10,
) -> TripleProductDiagnostic:
    """Low-frequency energy content of eigenvector products.

    c_k weights the walk-kernel eigenvector averages by sqrt of the walk
    eigenvalue; diff_k is the same average difference over the lazy-walk
    eigenvectors.
    """
    if basis_walk.source != SOURCE_WALK or basis_lazy.source != SOURCE_LAZY:
        raise SpectralError("expected a walk-kernel basis and a lazy-walk basis")
    if basis_walk.size != basis_lazy.size or basis_walk.size != pool.size:
        raise SpectralError("bases must come from the same stack as the pool")
    n, m = pool.n, pool.m
    root = np.sqrt(n + m)

    psi = basis_walk.eigenvectors
    sigma = np.clip(basis_walk.eigenvalues, 0.0, None)
    avg_psi = root / n * psi[:n, :].sum(axis=0) - root / m * psi[n:, :].sum(axis=0)
    c = np.sqrt(sigma) * avg_psi

    phi = basis_lazy.eigenvectors
    diff = (
        root / n * phi[:n, :].sum(axis=0) - root / m * phi[n:, :].sum(axis=0)
    )

    kept = int(np.count_nonzero(np.abs(basis_lazy.eigenvalues) > lam))
    phi_lam = phi[:, :kept]
    pairs = []
    for k, k2 in _lowest_frequency_pairs(pair_budget, basis_walk.size):
        prod = psi[:, k] * psi[:, k2]
        denom = float(prod @ prod)
        if denom == 0.0:
            pairs.append((k, k2, 1.0, True))
            continue
        coef = phi_lam.T @ prod
        fraction = float(coef @ coef) / denom
        pairs.append((k, k2, fraction, False))
    return TripleProductDiagnostic(c=c, diff=diff, pairs=pairs)
