"""Detection of uncorrelated contiguous index blocks in a covariance matrix.

Both detectors threshold the correlation matrix derived from the input: under
``contiguous-cut`` a boundary between indices ``i`` and ``i+1`` is placed
whenever every correlation straddling it is at most ``tau`` (yielding the
finest admissible contiguous partition); under ``components`` blocks come
from connected components of the graph ``{(i, j): |R[i][j]| > tau}``, split
into maximal contiguous index runs.

Grid points whose variance is exactly zero carry no correlation information.
Provided their covariance row is entirely zero (anything else is inconsistent
and raises), they are attached to the block on their left -- the same
tie-break used for support endpoints shared by two neighbouring blocks -- and
a leading zero-variance run joins the first block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .errors import DegenerateCovarianceError
from .model import BlockPartition, CovMatrix

METHODS = ("contiguous-cut", "components")


@dataclass(frozen=True)
class DetectionConfig:
    """How to threshold correlations.

    Exactly one of ``threshold`` (explicit) or ``quantile`` (null-calibrated,
    requires ``sample_size``) is normally set; with neither, detection falls
    back to the Bonferroni-style default quantile
    ``1 - 0.01 / (P (P - 1) / 2)``, which still needs ``sample_size``.
    """

    method: str = "contiguous-cut"
    threshold: float | None = None
    quantile: float | None = None
    sample_size: int | None = None
    report_threshold: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.threshold is not None and self.quantile is not None:
            raise ValueError("give either an explicit threshold or a quantile, not both")

    def to_json(self) -> str:
        data = {"method": self.method, "report_threshold": self.report_threshold}
        if self.threshold is not None:
            data["threshold"] = self.threshold
        if self.quantile is not None:
            data["quantile"] = self.quantile
        if self.sample_size is not None:
            data["sample_size"] = self.sample_size
        return json.dumps(data)

    @classmethod
    def from_json(cls, text: str) -> "DetectionConfig":
        return cls(**json.loads(text))


def default_quantile(p: int) -> float:
    """Family-wise 1% quantile across the p(p-1)/2 off-diagonal pairs."""
    return 1 - 0.01 / (p * (p - 1) / 2)


def calibrate_threshold(n: int, q: float) -> float:
    """q-quantile of |r| under the null of zero correlation at sample size n.

    Uses the exact null of the sample correlation coefficient: with
    ``t = r sqrt(n-2) / sqrt(1-r^2)`` distributed Student-t(n-2), the
    quantile is ``t_q / sqrt(t_q^2 + n - 2)`` at ``t_q = T^{-1}((1+q)/2)``.
    Consistent: for fixed q the threshold shrinks to 0 as n grows.
    """
    if n < 2:
        raise ValueError(f"sample size must be at least 2, got {n}")
    if not 0 < q < 1:
        raise ValueError(f"quantile must lie in (0, 1), got {q}")
    if n == 2:
        return 1.0  # two points determine |r| = 1
    tq = stats.t.ppf(0.5 + q / 2, n - 2)
    return float(tq / np.sqrt(tq * tq + n - 2))


def resolve_threshold(g: CovMatrix, cfg: DetectionConfig) -> float:
    """Explicit threshold, or the calibrated one for this grid size."""
    if cfg.threshold is not None:
        return float(cfg.threshold)
    q = cfg.quantile if cfg.quantile is not None else default_quantile(g.p)
    if cfg.sample_size is None:
        raise ValueError("quantile-calibrated detection requires sample_size in the config")
    return calibrate_threshold(cfg.sample_size, q)


def _abs_correlation(g: CovMatrix):
    """|correlation| with zero rows masked out; returns (A, alive mask)."""
    entries = g.entries
    d = np.diag(entries).copy()
    alive = d > 0
    if not np.all(alive):
        for i in np.nonzero(~alive)[0]:
            row = entries[i]
            if np.any(row != 0):
                raise DegenerateCovarianceError(
                    "zero-variance grid point with nonzero covariances", index=int(i)
                )
    a = np.zeros_like(entries)
    ia = np.nonzero(alive)[0]
    if ia.size:
        sd = np.sqrt(d[ia])
        a[np.ix_(ia, ia)] = np.abs(entries[np.ix_(ia, ia)]) / np.outer(sd, sd)
    return a, alive


def _blocks_from_cuts(cuts, p) -> BlockPartition:
    blocks, lo = [], 0
    for c in cuts:
        blocks.append((lo, c))
        lo = c + 1
    blocks.append((lo, p - 1))
    return BlockPartition(tuple(blocks))


def _contiguous_cut(a: np.ndarray, alive: np.ndarray, tau: float) -> BlockPartition:
    p = a.shape[0]
    # rect[i] = max |R| over the off-block rectangle [0..i] x [i+1..P-1];
    # suffix max along rows then prefix max down columns gives all of them.
    suffix = np.maximum.accumulate(a[:, ::-1], axis=1)[:, ::-1]
    prefix = np.maximum.accumulate(suffix, axis=0)
    rect = prefix[np.arange(p - 1), np.arange(1, p)]
    seen_alive = np.cumsum(alive) > 0
    cuts = [
        i
        for i in range(p - 1)
        if rect[i] <= tau and alive[i + 1] and seen_alive[i]
    ]
    return _blocks_from_cuts(cuts, p)


def _components(a: np.ndarray, alive: np.ndarray, tau: float) -> BlockPartition:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    p = a.shape[0]
    adj = a > tau
    np.fill_diagonal(adj, False)
    _, comp = connected_components(csr_matrix(adj), directed=False)
    # Dead points inherit the label on their left (first block if leading).
    labels = comp.astype(int)
    first_alive = int(np.argmax(alive)) if alive.any() else 0
    for i in range(p):
        if not alive[i]:
            labels[i] = labels[i - 1] if i > first_alive else labels[first_alive]
    cuts = [i for i in range(p - 1) if labels[i + 1] != labels[i]]
    return _blocks_from_cuts(cuts, p)


def detect_blocks(g: CovMatrix, cfg: DetectionConfig) -> BlockPartition:
    """Partition the grid so no correlation above the threshold crosses blocks.

    Raises
    ------
    DegenerateCovarianceError
        For a zero-variance grid point whose covariance row is not zero
        (the correlation there is undefined and the input inconsistent).
    """
    tau = resolve_threshold(g, cfg)
    a, alive = _abs_correlation(g)
    if cfg.method == "contiguous-cut":
        return _contiguous_cut(a, alive, tau)
    return _components(a, alive, tau)


def blocks_from_eigenfunctions(funcs, tau: float):
    """Per-eigenfunction support estimates: indices where |value| > tau.

    This is the thresholding baseline's notion of support, one index array
    per input function (possibly empty when the whole function sits below
    the threshold).  It does not form a partition; the simulation harness
    compares these supports directly against the true ones.
    """
    if tau <= 0:
        raise ValueError("threshold must be positive")
    funcs = [np.asarray(f, float) for f in funcs]
    if not funcs:
        raise ValueError("need at least one eigenfunction")
    return [np.nonzero(np.abs(f) > tau)[0] for f in funcs]
