"""End-to-end fit: center, denoise, detect blocks, localized decomposition.

The covariance handed to the detector has denoised off-diagonals and raw
variances on the diagonal (see ``covariance.detection_covariance``); the
localized decomposition itself runs on the denoised covariance.  When no
component count is given, components are retained until their cumulative
share of the decomposed variance reaches the denoising level.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .blockdetect import DetectionConfig, detect_blocks, resolve_threshold
from .covariance import (
    denoise_detail,
    detection_covariance,
    empirical_covariance,
    weighted_eigh,
)
from .ingest import center
from .localized import localized_fpca
from .model import BlockPartition, CovMatrix, CurveSet, LocalizedEigenSystem


@dataclass(frozen=True)
class FitResult:
    system: LocalizedEigenSystem
    partition: BlockPartition
    threshold: float
    truncation_level: int
    dense_eigenvalues: np.ndarray
    dense_eigenfunctions: np.ndarray  # columns
    denoised: CurveSet
    denoised_covariance: CovMatrix


def _truncate_retained(system: LocalizedEigenSystem, m: int) -> LocalizedEigenSystem:
    return LocalizedEigenSystem(
        grid=system.grid,
        partition=system.partition,
        components=system.components[:m],
        total_variance=system.total_variance,
        pve_per_component=system.pve_per_component[:m],
        pve_per_block=system.pve_per_block,
        m_clamped=system.m_clamped,
    )


def fit_localized(
    curves: CurveSet,
    pve: float = 0.99,
    detection: DetectionConfig = DetectionConfig(),
    m: int | None = None,
) -> FitResult:
    """Localized principal components of a curve sample.

    ``m`` picks the number of retained components explicitly; with ``None``
    the count comes from the cumulative explained-variance rule at level
    ``pve``.  Per-block spectra are capped at the denoising truncation level.
    """
    curves = center(curves)
    raw_cov = empirical_covariance(curves)
    det = denoise_detail(curves, pve, cov=raw_cov)
    den_cov = empirical_covariance(det.curves)
    detection_input = detection_covariance(raw_cov, den_cov)
    det_cfg = detection if detection.sample_size is not None else replace(
        detection, sample_size=curves.n
    )
    threshold = resolve_threshold(detection_input, det_cfg)
    partition = detect_blocks(detection_input, det_cfg)

    system = localized_fpca(den_cov, partition, m=m, j_max=det.n_components)
    if m is None and system.m > 0:
        cum = np.cumsum(system.pve_per_component)
        keep = int(np.searchsorted(cum, min(pve, cum[-1]) - 1e-12) + 1)
        system = _truncate_retained(system, keep)

    return FitResult(
        system=system,
        partition=partition,
        threshold=threshold,
        truncation_level=det.n_components,
        dense_eigenvalues=det.eigenvalues,
        dense_eigenfunctions=det.eigenfunctions,
        denoised=det.curves,
        denoised_covariance=den_cov,
    )
