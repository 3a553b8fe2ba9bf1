"""Empirical covariance estimation and truncated-KL curve denoising.

The discrete eigenproblem follows the weighted convention: with ``W`` the
diagonal quadrature-weight matrix, eigendecompose ``W^{1/2} G W^{1/2}`` and
map eigenvectors back through ``W^{-1/2}``.  The resulting eigenfunctions are
orthonormal in the quadrature inner product and the eigenvalues approximate
those of the underlying integral operator.

Denoising replaces each curve by its projection on the leading eigenfunctions
that explain a requested fraction of variance.  This is a plain truncated-KL
reconstruction of the raw empirical covariance; no roughness penalty is
applied, and reports carry a ``smoothing`` tag so downstream consumers know
which smoother produced the curves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotCenteredError, NumericError
from .model import CovMatrix, CurveSet

# Eigenvalues below this fraction of the leading one are treated as zero.
EIGENVALUE_FLOOR = 1e-12


def empirical_covariance(c: CurveSet) -> CovMatrix:
    """Sample covariance ``G[i, j] = sum_n x_n(s_i) x_n(s_j) / (N - 1)``.

    Requires centered curves and N >= 2.  The result is symmetrized exactly
    (average with its transpose) so the CovMatrix symmetry invariant holds
    bit-for-bit.
    """
    if not c.centered:
        raise NotCenteredError("empirical_covariance requires centered curves")
    if c.n < 2:
        raise ValueError(f"need at least 2 curves, got {c.n}")
    m = c.values.T @ c.values / (c.n - 1)
    return CovMatrix(c.grid, (m + m.T) / 2)


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive.

    Ties resolve to the lowest index (argmax convention), which makes the
    orientation deterministic across runs.
    """
    vectors = np.array(vectors)
    for j in range(vectors.shape[1]):
        i = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[i, j] < 0:
            vectors[:, j] = -vectors[:, j]
    return vectors


def weighted_eigh(entries: np.ndarray, weights: np.ndarray):
    """Eigendecompose a covariance kernel under the quadrature inner product.

    Returns ``(eigenvalues, functions)`` with eigenvalues descending and
    functions as columns, quadrature-orthonormal and sign-fixed.  Eigenvalues
    below ``EIGENVALUE_FLOOR`` relative to the largest (and all negative dust)
    are clipped to zero but kept in the output so callers see the full
    spectrum length.
    """
    entries = np.asarray(entries, float)
    if not np.all(np.isfinite(entries)):
        raise NumericError("covariance entries must be finite")
    sw = np.sqrt(np.asarray(weights, float))
    sym = sw[:, None] * entries * sw[None, :]
    vals, vecs = np.linalg.eigh((sym + sym.T) / 2)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    top = vals[0] if vals.size else 0.0
    vals = np.where(vals > max(top, 0.0) * EIGENVALUE_FLOOR, vals, 0.0)
    return vals, fix_signs(vecs / sw[:, None])


def choose_truncation(eigenvalues, pve: float) -> int:
    """Smallest L whose leading eigenvalues reach the requested variance share.

    ``eigenvalues`` must be sorted descending with at least one positive
    entry; ``pve`` lies in (0, 1].
    """
    lam = np.asarray(eigenvalues, float)
    if lam.size == 0 or np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be non-empty and sorted descending")
    if not 0 < pve <= 1:
        raise ValueError(f"pve must lie in (0, 1], got {pve}")
    total = lam.sum()
    if total <= 0:
        raise ValueError("all eigenvalues are zero")
    ratio = np.cumsum(lam) / total
    return int(np.searchsorted(ratio, pve - 1e-12) + 1)


@dataclass(frozen=True)
class DenoiseResult:
    """Truncated-KL reconstruction plus the spectrum it came from."""

    curves: CurveSet
    n_components: int
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # columns, quadrature-orthonormal


def denoise_detail(c: CurveSet, pve: float, cov: CovMatrix | None = None) -> DenoiseResult:
    """Project curves on the leading KL components of their own covariance.

    ``cov`` may pass a precomputed ``empirical_covariance(c)`` to avoid
    recomputing it.
    """
    if cov is None:
        cov = empirical_covariance(c)
    elif not cov.grid.matches(c.grid):
        raise ValueError("precomputed covariance lives on a different grid")
    vals, funcs = weighted_eigh(cov.entries, c.grid.weights)
    level = choose_truncation(vals, pve)
    basis = funcs[:, :level]
    scores = c.values @ (c.grid.weights[:, None] * basis)
    smooth = scores @ basis.T
    return DenoiseResult(CurveSet(c.grid, smooth, centered=True), level, vals, funcs)


def denoise_kl(c: CurveSet, pve: float) -> CurveSet:
    """Truncated-KL denoising at the given explained-variance level.

    Reapplying with the same ``pve`` reproduces the output up to
    floating-point noise whenever the retained spectrum dominates (the
    denoising regime: a clear cliff between signal and discarded variance,
    or ``pve=1``).  On near-flat spectra a second pass re-truncates, because
    the variance level is recomputed from the already-truncated total.
    """
    return denoise_detail(c, pve).curves


def detection_covariance(raw: CovMatrix, denoised: CovMatrix) -> CovMatrix:
    """Covariance handed to block detection: denoised off-diagonal, raw diagonal.

    Truncated-KL output is exactly rank-L, so at grid points where the signal
    has died out the reconstructed values are pure estimation dust sharing the
    same L scores; their correlations are O(1) and would weld unrelated blocks
    together.  Keeping each point's raw variance on the diagonal deflates
    those correlations to (below) the sampling-null scale the detection
    threshold is calibrated for, while genuinely correlated regions are
    untouched.  The result stays positive semi-definite because the raw
    diagonal dominates the denoised one.
    """
    if not raw.grid.matches(denoised.grid):
        raise ValueError("raw and denoised covariances must share a grid")
    entries = np.array(denoised.entries)
    np.fill_diagonal(entries, np.diag(raw.entries))
    return CovMatrix(raw.grid, entries)
