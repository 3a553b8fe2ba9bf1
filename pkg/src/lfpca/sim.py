"""Synthetic study of support recovery and explained-variance preservation.

Curves are drawn from a truncated expansion ``X_n = sum_k sqrt(lam_k) xi_nk
psi_k`` with iid standard normal scores, observed with additive Gaussian
noise on a dense grid of [0, 1].  Three uncorrelated regions [0, 0.3],
[0.3, 0.6] and [0.6, 1] carry the dominant components:

* design A assigns one compactly supported cubic spline to each region
  (eigenvalues 36, 16, 4) plus five low-variance global Fourier components;
* design B replaces the first region's component by two splines supported
  there, splitting its variance 70/30.

The region-carrying splines come from the cubic B-spline family on breaks
{0, 0.3, 0.6, 1} with full-order interior knots, whose 1st, 5th and 9th
members are supported exactly on the three regions.  Design B's pair are the
2nd and 4th basis functions of a clamped cubic basis on six equidistant
breaks of [0, 0.3], zero-padded outside.  All basis vectors are
Gram-Schmidt-orthonormalized, in listed order, under the quadrature inner
product.

``run_study`` runs the full per-replication pipeline (generate, center,
denoise, detect or threshold, score the recovery) with one derived seed per
replication, so results are reproducible and replication order is
irrelevant.  Set the environment variable ``LFPCA_THREADS`` above 1 to run
replications in a thread pool.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import BSpline

from .blockdetect import DetectionConfig, blocks_from_eigenfunctions, detect_blocks
from .covariance import denoise_detail, detection_covariance, empirical_covariance
from .ingest import center
from .localized import localized_fpca
from .model import CurveSet, Grid, LocalizedEigenSystem

METHODS = ("lfpca", "fpca-tau")

_BASE_EIGENVALUES = (36.0, 16.0, 4.0, 0.25, 0.0625, 0.04, 0.0225, 0.01)
_SUPPORTS = ((0.0, 0.3), (0.3, 0.6), (0.6, 1.0))


@dataclass(frozen=True)
class SimDesign:
    """Generator settings; ``first_block_split`` is used by design B only."""

    name: str
    eigenvalues: tuple = _BASE_EIGENVALUES
    supports: tuple = _SUPPORTS
    noise_sd: float = 0.1
    seed: int = 0
    first_block_split: tuple = (0.7, 0.3)

    def __post_init__(self):
        if self.name not in ("A", "B"):
            raise ValueError(f"design name must be 'A' or 'B', got {self.name!r}")
        if len(self.eigenvalues) != 8:
            raise ValueError("designs use exactly 8 base eigenvalues")
        if self.supports != _SUPPORTS:
            raise ValueError(f"supports are fixed to {_SUPPORTS}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")

    def component_eigenvalues(self) -> np.ndarray:
        lam = np.asarray(self.eigenvalues, float)
        if self.name == "A":
            return lam
        a, b = self.first_block_split
        return np.concatenate([[a * lam[0], b * lam[0]], lam[1:]])

    def true_pve_per_block(self) -> np.ndarray:
        """Population variance share of each region: region components / total."""
        lam = np.asarray(self.eigenvalues, float)
        return lam[:3] / lam.sum()

    def components_per_block(self):
        """How many of the leading components live on each region."""
        return (2, 1, 1) if self.name == "B" else (1, 1, 1)


def design_a(noise_sd: float = 0.1, seed: int = 0) -> SimDesign:
    return SimDesign(name="A", noise_sd=noise_sd, seed=seed)


def design_b(noise_sd: float = 0.1, seed: int = 0) -> SimDesign:
    return SimDesign(name="B", noise_sd=noise_sd, seed=seed)


def _gram_schmidt(rows, weights):
    out = []
    for v in rows:
        v = np.asarray(v, float).copy()
        for u in out:
            v -= np.sum(weights * v * u) * u
        nrm = np.sqrt(np.sum(weights * v * v))
        if nrm == 0:
            raise ValueError("basis functions are linearly dependent on this grid")
        out.append(v / nrm)
    return np.vstack(out)


def _region_splines(points):
    """Columns 1, 5, 9 (1-based) of the segmented cubic basis on {0,.3,.6,1}."""
    knots = np.array([0.0] * 4 + [0.3] * 4 + [0.6] * 4 + [1.0] * 4)
    dm = BSpline.design_matrix(points, knots, 3).toarray()
    return dm[:, 0], dm[:, 4], dm[:, 8]


def _first_region_pair(points):
    """Clamped cubic basis members 2 and 4 on six breaks of [0, 0.3], padded."""
    breaks = np.linspace(0.0, 0.3, 6)
    knots = np.concatenate([[0.0] * 3, breaks, [0.3] * 3])
    mask = points <= 0.3
    dm = BSpline.design_matrix(points[mask], knots, 3).toarray()
    b2 = np.zeros(points.size)
    b4 = np.zeros(points.size)
    b2[mask] = dm[:, 1]
    b4[mask] = dm[:, 3]
    return b2, b4


def build_basis(design: SimDesign, grid: Grid) -> np.ndarray:
    """Orthonormal component functions as rows: 8 for design A, 9 for design B.

    Raises
    ------
    ValueError
        If the grid does not span [0, 1].
    """
    pts = grid.points
    if abs(pts[0]) > 1e-12 or abs(pts[-1] - 1.0) > 1e-12:
        raise ValueError("designs are defined on [0, 1]; grid must span it")
    s1, s2, s3 = _region_splines(pts)
    rows = [s1, s2, s3] if design.name == "A" else [*_first_region_pair(pts), s2, s3]
    rows += [
        np.sqrt(2) * np.sin(4 * np.pi * pts),
        np.sqrt(2) * np.cos(6 * np.pi * pts),
        np.sqrt(2) * np.sin(6 * np.pi * pts),
        np.sqrt(2) * np.cos(8 * np.pi * pts),
        np.sqrt(2) * np.sin(8 * np.pi * pts),
    ]
    return _gram_schmidt(rows, grid.weights)


def population_covariance(design: SimDesign, grid: Grid, n_components: int | None = None):
    """Exact covariance of the generator, optionally truncated to the leading part."""
    basis = build_basis(design, grid)
    lam = design.component_eigenvalues()
    if n_components is not None:
        basis, lam = basis[:n_components], lam[:n_components]
    return (basis.T * lam) @ basis


def true_support_indices(design: SimDesign, grid: Grid):
    """Grid indices of each region, endpoints included on both sides."""
    return [
        np.nonzero((grid.points >= lo - 1e-12) & (grid.points <= hi + 1e-12))[0]
        for lo, hi in design.supports
    ]


def generate(design: SimDesign, n: int, grid: Grid, rng=None):
    """Draw n noisy curves and their noise-free versions.

    Returns ``(noisy, latent, supports)`` where ``supports`` are the true
    per-region grid index sets.  Deterministic for a given design seed; pass
    ``rng`` to override (the study harness derives one per replication).
    """
    if n < 2:
        raise ValueError(f"need at least 2 curves, got {n}")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(design.seed))
    basis = build_basis(design, grid)
    lam = design.component_eigenvalues()
    scores = rng.standard_normal((n, lam.size))
    latent = (scores * np.sqrt(lam)) @ basis
    noise = rng.normal(0.0, design.noise_sd, latent.shape) if design.noise_sd > 0 else 0.0
    return (
        CurveSet(grid, latent + noise, centered=False),
        CurveSet(grid, latent, centered=False),
        true_support_indices(design, grid),
    )


# ---------------------------------------------------------------------------
# Component matching and recovery metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchResult:
    """Greedy one-to-one assignment of estimated components to truth vectors.

    ``assignments[i]`` is the truth index matched to estimated component i,
    or -1 when unmatched; ``correlations[i]`` the corresponding |Pearson r|.
    Components that are constant over the grid cannot be correlated and are
    listed in ``constant_components``.
    """

    assignments: tuple
    correlations: tuple
    constant_components: tuple = ()


def _greedy_match(estimated: np.ndarray, truth: np.ndarray) -> MatchResult:
    n_est, n_tru = estimated.shape[0], truth.shape[0]
    assign = [-1] * n_est
    corr = [0.0] * n_est
    constant = [i for i in range(n_est) if np.std(estimated[i]) == 0]
    pairs = []
    for i in range(n_est):
        if i in constant:
            continue
        for j in range(n_tru):
            r = abs(float(np.corrcoef(estimated[i], truth[j])[0, 1]))
            pairs.append((r, i, j))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_est, used_tru = set(), set()
    for r, i, j in pairs:
        if i in used_est or j in used_tru:
            continue
        assign[i], corr[i] = j, r
        used_est.add(i)
        used_tru.add(j)
    return MatchResult(tuple(assign), tuple(corr), tuple(constant))


def match_components(estimated: LocalizedEigenSystem, truth: np.ndarray) -> MatchResult:
    """Match retained components against reference basis vectors by |Pearson r|."""
    if estimated.m == 0:
        raise ValueError("eigensystem has no retained components to match")
    return _greedy_match(estimated.basis_matrix(), np.atleast_2d(np.asarray(truth, float)))


def support_metrics(estimated, true, p: int):
    """(specificity, precision) of an estimated support index set.

    With TN, TP, FP counted over {0, ..., p-1}: specificity = TN / (TN + FP)
    and precision = TP / (TP + FP).  An all-covering true support makes
    specificity 1 by convention; an empty estimate makes precision 0.
    """
    est = set(int(i) for i in estimated)
    tru = set(int(i) for i in true)
    if not all(0 <= i < p for i in est | tru):
        raise ValueError("support indices out of range")
    universe = set(range(p))
    tn = len((universe - est) & (universe - tru))
    tp = len(est & tru)
    fp = len(est - tru)
    specificity = tn / (tn + fp) if tn + fp else 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    return specificity, precision


def pve_ratio(estimated_pve, true_pve, alignment):
    """Elementwise estimated / true variance share, aligned per true block.

    ``alignment[k]`` indexes the estimated block matched to true block k, or
    a negative value when unmatched, which yields NaN in the output.
    """
    est = np.asarray(estimated_pve, float)
    tru = np.asarray(true_pve, float)
    out = np.full(tru.size, np.nan)
    for k, j in enumerate(alignment):
        if j is not None and j >= 0:
            out[k] = est[j] / tru[k]
    return out


# ---------------------------------------------------------------------------
# Study harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    """Pipeline knobs shared by every replication of a study."""

    pve: float = 0.99
    m: int = 10
    detection: DetectionConfig = DetectionConfig()
    tau: float | None = None  # fpca-tau support threshold
    grid_points: int = 1001


@dataclass(frozen=True)
class MetricsRecord:
    """Per-replication recovery scores, one entry per true region."""

    rep: int
    method: str
    specificity: tuple = ()
    precision: tuple = ()
    pve_ratio: tuple = ()
    n_blocks_detected: int = 0
    detected_blocks: tuple = ()
    matched_components: tuple = ()
    flags: tuple = ()
    error: str | None = None


def _align_blocks(partition, true_sets):
    """Index of the detected block overlapping each true region the most."""
    ranges = [set(range(lo, hi + 1)) for lo, hi in partition.blocks]
    out = []
    for tru in true_sets:
        tset = set(int(i) for i in tru)
        overlaps = [len(tset & r) for r in ranges]
        out.append(int(np.argmax(overlaps)) if max(overlaps) > 0 else -1)
    return out


def _run_rep_lfpca(design, n, grid, cfg, rng):
    noisy, _, true_sets = generate(design, n, grid, rng)
    curves = center(noisy)
    raw_cov = empirical_covariance(curves)
    det = denoise_detail(curves, cfg.pve, cov=raw_cov)
    den_cov = empirical_covariance(det.curves)
    detection_input = detection_covariance(raw_cov, den_cov)
    det_cfg = replace(cfg.detection, sample_size=n)
    partition = detect_blocks(detection_input, det_cfg)
    system = localized_fpca(den_cov, partition, m=cfg.m, j_max=det.n_components)

    align = _align_blocks(partition, true_sets)
    spec, prec, flags = [], [], []
    for k, tru in enumerate(true_sets):
        j = align[k]
        est = partition.indices(j) if j >= 0 else []
        if len(est) == 0:
            flags.append(f"block{k + 1}:empty-support")
        s, p = support_metrics(est, tru, grid.p)
        spec.append(s)
        prec.append(p)
    ratios = pve_ratio(system.pve_per_block, design.true_pve_per_block(), align)
    return MetricsRecord(
        rep=-1,
        method="lfpca",
        specificity=tuple(spec),
        precision=tuple(prec),
        pve_ratio=tuple(float(r) for r in ratios),
        n_blocks_detected=partition.k,
        detected_blocks=partition.blocks,
        matched_components=tuple(align),
        flags=tuple(flags),
    )


def _run_rep_fpca_tau(design, n, grid, cfg, rng):
    if cfg.tau is None:
        raise ValueError("fpca-tau needs cfg.tau")
    noisy, _, true_sets = generate(design, n, grid, rng)
    curves = center(noisy)
    det = denoise_detail(curves, cfg.pve, cov=empirical_covariance(curves))
    n_pos = int(np.count_nonzero(det.eigenvalues > 0))
    m = min(cfg.m, n_pos)
    funcs = det.eigenfunctions[:, :m].T
    eigvals = det.eigenvalues[:m]
    truth = build_basis(design, grid)
    n_compact = sum(design.components_per_block())
    match = _greedy_match(funcs, truth[:n_compact])

    # true component index -> estimated component index (if any)
    est_for_truth = {j: i for i, j in enumerate(match.assignments) if j >= 0}
    supports = blocks_from_eigenfunctions(list(funcs), cfg.tau)
    counts = design.components_per_block()
    spec, prec, ratios, flags, matched = [], [], [], [], []
    total = float(det.eigenvalues.sum())
    offset = 0
    for k, cnt in enumerate(counts):
        members = [est_for_truth.get(offset + c) for c in range(cnt)]
        offset += cnt
        est_support = set()
        mass = 0.0
        for ei in members:
            if ei is None:
                flags.append(f"block{k + 1}:unmatched-component")
                continue
            est_support |= set(int(i) for i in supports[ei])
            mass += float(eigvals[ei])
        if not est_support:
            flags.append(f"block{k + 1}:empty-support")
        s, p = support_metrics(est_support, true_sets[k], grid.p)
        spec.append(s)
        prec.append(p)
        ratios.append(mass / total / design.true_pve_per_block()[k] if total > 0 else np.nan)
        matched.append(tuple(-1 if ei is None else ei for ei in members))
    return MetricsRecord(
        rep=-1,
        method="fpca-tau",
        specificity=tuple(spec),
        precision=tuple(prec),
        pve_ratio=tuple(float(r) for r in ratios),
        n_blocks_detected=len([sp for sp in supports if sp.size]),
        detected_blocks=(),
        matched_components=tuple(matched),
        flags=tuple(flags),
    )


def run_study(design: SimDesign, n: int, reps: int, method: str, cfg: StudyConfig = StudyConfig()):
    """Run the per-replication pipeline ``reps`` times and collect metrics.

    Replication r uses the generator seeded from (design.seed, r), so records
    are reproducible and independent of execution order.  Failures inside one
    replication are captured on its record instead of aborting the study.
    """
    if reps < 1:
        raise ValueError(f"reps must be at least 1, got {reps}")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if method == "fpca-tau" and cfg.tau is None:
        raise ValueError("fpca-tau needs cfg.tau")
    grid = _uniform_unit_grid(cfg.grid_points)
    worker = _run_rep_lfpca if method == "lfpca" else _run_rep_fpca_tau

    def one(rep: int) -> MetricsRecord:
        rng = np.random.default_rng(np.random.SeedSequence([design.seed, rep]))
        try:
            record = worker(design, n, grid, cfg, rng)
            return replace(record, rep=rep)
        except Exception as exc:  # noqa: BLE001 - per-replication isolation
            return MetricsRecord(rep=rep, method=method, error=f"{type(exc).__name__}: {exc}")

    threads = int(os.environ.get("LFPCA_THREADS", "1") or 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, range(reps)))
    else:
        records = [one(rep) for rep in range(reps)]
    records.sort(key=lambda r: r.rep)
    return records


def _uniform_unit_grid(p: int) -> Grid:
    from .model import make_uniform_grid

    return make_uniform_grid(p, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "rep",
    "method",
    "block",
    "specificity",
    "precision",
    "pve_ratio",
    "n_blocks_detected",
)


def write_metrics_csv(records, path) -> None:
    """One row per (replication, block); errored replications are skipped."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            if rec.error is not None:
                continue
            for k in range(len(rec.specificity)):
                writer.writerow(
                    [
                        rec.rep,
                        rec.method,
                        k + 1,
                        repr(rec.specificity[k]),
                        repr(rec.precision[k]),
                        repr(rec.pve_ratio[k]),
                        rec.n_blocks_detected,
                    ]
                )


def _quartiles(values):
    arr = np.asarray([v for v in values if np.isfinite(v)], float)
    if arr.size == 0:
        return {"median": None, "q1": None, "q3": None}
    return {
        "median": float(np.median(arr)),
        "q1": float(np.quantile(arr, 0.25)),
        "q3": float(np.quantile(arr, 0.75)),
    }


def summarize_metrics(records, design_name: str = "", n: int | None = None) -> dict:
    """Median/quartile box-plot statistics per block and pooled."""
    ok = [r for r in records if r.error is None]
    failures = [{"rep": r.rep, "error": r.error} for r in records if r.error is not None]
    n_blocks = len(ok[0].specificity) if ok else 0
    per_block = []
    for k in range(n_blocks):
        per_block.append(
            {
                "block": k + 1,
                "specificity": _quartiles([r.specificity[k] for r in ok]),
                "precision": _quartiles([r.precision[k] for r in ok]),
                "pve_ratio": _quartiles([r.pve_ratio[k] for r in ok]),
            }
        )
    pooled = {
        "specificity": _quartiles([s for r in ok for s in r.specificity]),
        "precision": _quartiles([s for r in ok for s in r.precision]),
        "pve_ratio": _quartiles([s for r in ok for s in r.pve_ratio]),
    }
    method = ok[0].method if ok else (records[0].method if records else "")
    return {
        "design": design_name,
        "n": n,
        "method": method,
        "reps": len(records),
        "per_block": per_block,
        "pooled": pooled,
        "failures": failures,
    }
