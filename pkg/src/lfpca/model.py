"""Domain types for functional data observed on a shared dense grid.

All inner products, norms and orthonormality statements in this package use
the discrete quadrature inner product ``<f, g> = sum_p w_p f(s_p) g(s_p)``
with trapezoid weights ``w``.  Every type is immutable after construction
(arrays are stored read-only), so instances can be shared freely across
concurrent workers.

Indexing is 0-based internally; reports and serialized output use 1-based
block/component numbering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen_array(values, dtype=float, ndim=None, name="array"):
    a = np.array(values, dtype=dtype)
    if ndim is not None and a.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered sample points of a compact interval with quadrature weights.

    Parameters
    ----------
    points : array of float, shape (P,)
        Strictly increasing sample locations, P >= 2.
    weights : array of float, shape (P,)
        Positive quadrature weights.  Their sum must equal the domain length
        ``points[-1] - points[0]`` (trapezoid rule is exact on constants).
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen_array(self.points, ndim=1, name="points"))
        object.__setattr__(self, "weights", _frozen_array(self.weights, ndim=1, name="weights"))
        if self.points.size < 2:
            raise ValueError("grid needs at least 2 points")
        if self.weights.shape != self.points.shape:
            raise ValueError("points and weights must have equal length")
        if not np.all(np.diff(self.points) > 0):
            raise ValueError("grid points must be strictly increasing")
        if not np.all(self.weights > 0):
            raise ValueError("quadrature weights must be positive")
        length = self.points[-1] - self.points[0]
        if abs(self.weights.sum() - length) > 1e-10 * max(length, 1.0):
            raise ValueError("quadrature weights must sum to the domain length")

    @property
    def p(self) -> int:
        return self.points.size

    def inner(self, f, g) -> float:
        """Quadrature inner product of two functions sampled on this grid."""
        return float(np.sum(self.weights * np.asarray(f) * np.asarray(g)))

    def norm(self, f) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def matches(self, other: "Grid") -> bool:
        """Exact equality of sample points and weights."""
        return np.array_equal(self.points, other.points) and np.array_equal(
            self.weights, other.weights
        )


def make_uniform_grid(p: int, a: float, b: float) -> Grid:
    """Equidistant grid on [a, b] with trapezoid weights (half weight at ends).

    Raises
    ------
    ValueError
        If ``p < 2`` or ``b <= a``.
    """
    if p < 2:
        raise ValueError(f"need at least 2 grid points, got {p}")
    if not b > a:
        raise ValueError(f"invalid interval [{a}, {b}]")
    points = np.linspace(a, b, p)
    h = (b - a) / (p - 1)
    weights = np.full(p, h)
    weights[0] = weights[-1] = h / 2
    return Grid(points, weights)


@dataclass(frozen=True, eq=False)
class CurveSet:
    """N curves sampled on a shared grid, one row per curve."""

    grid: Grid
    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, ndim=2, name="values"))
        if self.values.shape[1] != self.grid.p:
            raise ValueError(
                f"curves have {self.values.shape[1]} samples but grid has {self.grid.p} points"
            )
        if self.centered and self.values.shape[0] > 1:
            col_means = self.values.mean(axis=0)
            scale = self.values.std(axis=0).max()
            if scale > 0 and np.abs(col_means).max() > 1e-10 * scale:
                raise ValueError("curves flagged as centered but column means are not zero")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class CovMatrix:
    """Symmetric P x P covariance estimate on a grid.

    Symmetry is required up to ``1e-12 * max|entry|``; the diagonal must be
    non-negative up to the same tolerance.
    """

    grid: Grid
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen_array(self.entries, ndim=2, name="entries"))
        p = self.grid.p
        if self.entries.shape != (p, p):
            raise ValueError(f"covariance must be {p}x{p}, got {self.entries.shape}")
        scale = np.abs(self.entries).max()
        if np.abs(self.entries - self.entries.T).max() > 1e-12 * max(scale, 1e-300):
            raise ValueError("covariance matrix is not symmetric")
        if np.diag(self.entries).min() < -1e-12 * max(scale, 1e-300):
            raise ValueError("covariance diagonal has negative entries")

    @property
    def p(self) -> int:
        return self.grid.p


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """Ordered disjoint index intervals [lo, hi] covering {0, ..., P-1}."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple((int(lo), int(hi)) for lo, hi in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise ValueError("partition must contain at least one block")
        if blocks[0][0] != 0:
            raise ValueError("first block must start at index 0")
        for (lo, hi) in blocks:
            if hi < lo:
                raise ValueError(f"empty block [{lo}, {hi}]")
        for (_, hi), (lo2, _) in zip(blocks, blocks[1:]):
            if lo2 != hi + 1:
                raise ValueError("blocks must be contiguous and disjoint")

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def p(self) -> int:
        return self.blocks[-1][1] + 1

    def indices(self, block_id: int) -> np.ndarray:
        lo, hi = self.blocks[block_id]
        return np.arange(lo, hi + 1)

    def slices(self):
        return [slice(lo, hi + 1) for lo, hi in self.blocks]


@dataclass(frozen=True, eq=False)
class EigenComponent:
    """One localized eigenpair: zero outside its block, unit quadrature norm.

    ``within_block_rank`` is the 0-based position of the eigenvalue inside its
    block's descending spectrum.  ``degenerate`` flags members of eigenvalue
    clusters closer than 1e-10 relative, where individual eigenvectors are not
    uniquely determined.
    """

    eigenvalue: float
    values: np.ndarray
    block_id: int
    within_block_rank: int
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "eigenvalue", float(self.eigenvalue))
        object.__setattr__(self, "values", _frozen_array(self.values, ndim=1, name="values"))
        if self.eigenvalue < 0:
            raise ValueError("eigenvalue must be non-negative")


@dataclass(frozen=True, eq=False)
class LocalizedEigenSystem:
    """Merged localized eigenpairs with explained-variance accounting.

    ``components`` holds the retained eigenpairs sorted by eigenvalue
    descending.  ``total_variance`` sums every positive eigenvalue of every
    block, retained or not, so ``pve_per_component`` and ``pve_per_block``
    are fractions of the full decomposed variance.  ``m_clamped`` is set when
    fewer components were available than requested.
    """

    grid: Grid
    partition: BlockPartition
    components: tuple
    total_variance: float
    pve_per_component: np.ndarray
    pve_per_block: np.ndarray
    m_clamped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(
            self, "pve_per_component", _frozen_array(self.pve_per_component, ndim=1, name="pve")
        )
        object.__setattr__(
            self, "pve_per_block", _frozen_array(self.pve_per_block, ndim=1, name="pve_per_block")
        )
        if self.total_variance <= 0:
            raise ValueError("total variance must be positive")
        eigs = [c.eigenvalue for c in self.components]
        if any(a < b for a, b in zip(eigs, eigs[1:])):
            raise ValueError("components must be sorted by eigenvalue descending")
        if self.pve_per_block.size != self.partition.k:
            raise ValueError("pve_per_block must have one entry per block")

    @property
    def m(self) -> int:
        return len(self.components)

    def eigenvalues(self) -> np.ndarray:
        return np.array([c.eigenvalue for c in self.components])

    def basis_matrix(self) -> np.ndarray:
        """Retained eigenfunctions stacked as an (M, P) matrix."""
        if not self.components:
            return np.zeros((0, self.grid.p))
        return np.vstack([c.values for c in self.components])


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Per-curve scores on the retained components, shape (N, M)."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, ndim=2, name="values"))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]
