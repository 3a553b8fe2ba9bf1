import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfpca import (
    CurveSet,
    NotCenteredError,
    center,
    choose_truncation,
    denoise_kl,
    design_a,
    detection_covariance,
    empirical_covariance,
    generate,
    make_uniform_grid,
    weighted_eigh,
)

# Base eigenvalues of the synthetic designs: (6, 4, 2, .5, .25, .2, .15, .1)^2.
DESIGN_LAMBDA = (36.0, 16.0, 4.0, 0.25, 0.0625, 0.04, 0.0225, 0.01)


class TestEmpiricalCovariance:
    def test_hand_example_parallel(self):
        g = make_uniform_grid(2, 0.0, 1.0)
        c = CurveSet(g, np.array([[-1.0, -1.0], [1.0, 1.0]]), centered=True)
        assert np.allclose(empirical_covariance(c).entries, [[2, 2], [2, 2]])

    def test_hand_example_antiparallel(self):
        g = make_uniform_grid(2, 0.0, 1.0)
        c = CurveSet(g, np.array([[-1.0, 1.0], [1.0, -1.0]]), centered=True)
        assert np.allclose(empirical_covariance(c).entries, [[2, -2], [-2, 2]])

    def test_requires_centered(self):
        g = make_uniform_grid(2, 0.0, 1.0)
        with pytest.raises(NotCenteredError):
            empirical_covariance(CurveSet(g, np.ones((3, 2))))

    def test_requires_two_curves(self):
        g = make_uniform_grid(2, 0.0, 1.0)
        with pytest.raises(ValueError, match="at least 2"):
            empirical_covariance(CurveSet(g, np.zeros((1, 2)), centered=True))

    def test_bitwise_symmetric(self):
        rng = np.random.default_rng(5)
        g = make_uniform_grid(31, 0.0, 1.0)
        c = center(CurveSet(g, rng.standard_normal((12, 31))))
        m = empirical_covariance(c).entries
        assert np.array_equal(m, m.T)

    def test_design_sample_matches_population_at_sampling_scale(self, unit_grid_1001, pop_cov_a_full):
        # Entrywise error of the N=1000 sample covariance stays within a few
        # multiples of its own sampling scale sqrt((G_ii G_jj + G_ij^2) / N).
        _, latent, _ = generate(design_a(seed=41), 1000, unit_grid_1001)
        g_hat = empirical_covariance(center(latent)).entries
        g_pop = pop_cov_a_full.entries
        scale = np.sqrt((np.outer(np.diag(g_pop), np.diag(g_pop)) + g_pop**2) / 1000)
        assert (np.abs(g_hat - g_pop) / np.maximum(scale, 1e-12)).max() < 6.0

    @pytest.mark.xfail(
        reason="0.5 absolute entrywise tolerance is below the N=1000 sampling "
        "noise floor: population entries reach ~840, so single-entry errors of "
        "order 840*sqrt(2/N) ~ 38 are expected",
        strict=True,
    )
    def test_design_sample_within_half_absolute(self, unit_grid_1001, pop_cov_a_full):
        _, latent, _ = generate(design_a(seed=41), 1000, unit_grid_1001)
        g_hat = empirical_covariance(center(latent)).entries
        assert np.abs(g_hat - pop_cov_a_full.entries).max() < 0.5


class TestChooseTruncation:
    def test_single_positive(self):
        assert choose_truncation([1.0, 0.0, 0.0], 0.9) == 1

    def test_design_lambda_at_90(self):
        # cumulative shares: 36/56.385 = 0.638, 52/56.385 = 0.922 >= 0.90
        assert choose_truncation(DESIGN_LAMBDA, 0.90) == 2

    def test_design_lambda_at_99(self):
        # 56/56.385 = 0.9932 >= 0.99
        assert choose_truncation(DESIGN_LAMBDA, 0.99) == 3

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            choose_truncation([0.0, 0.0], 0.9)

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            choose_truncation([1.0, 2.0], 0.9)

    def test_pve_out_of_range(self):
        with pytest.raises(ValueError):
            choose_truncation([1.0], 1.5)

    @given(
        st.lists(st.floats(min_value=0, max_value=1e6), min_size=1, max_size=12),
        st.floats(min_value=0.01, max_value=1.0),
        st.floats(min_value=0.0, max_value=0.5),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_pve(self, lam, pve_hi, drop):
        lam = sorted(lam, reverse=True)
        if sum(lam) <= 0:
            return
        pve_lo = max(pve_hi - drop, 1e-6)
        assert choose_truncation(lam, pve_lo) <= choose_truncation(lam, pve_hi)


class TestDenoise:
    def test_rank_one_data_unchanged(self):
        rng = np.random.default_rng(1)
        g = make_uniform_grid(41, 0.0, 1.0)
        direction = np.sin(np.pi * g.points)
        coef = rng.standard_normal(30)
        c = center(CurveSet(g, np.outer(coef, direction)))
        d = denoise_kl(c, 0.99)
        assert np.abs(d.values - c.values).max() < 1e-8

    def test_full_rank_at_pve_one(self):
        rng = np.random.default_rng(2)
        g = make_uniform_grid(13, 0.0, 1.0)
        c = center(CurveSet(g, rng.standard_normal((40, 13))))
        d = denoise_kl(c, 1.0)
        assert np.abs(d.values - c.values).max() < 1e-8

    def test_projection_idempotent(self):
        # Idempotence needs a dominant leading spectrum: with a flat spectrum
        # the second pass re-truncates the already-truncated variance.  Data
        # with a clear signal cliff (the denoising use case) is stable.
        rng = np.random.default_rng(3)
        g = make_uniform_grid(25, 0.0, 1.0)
        basis = np.array([np.sin(np.pi * g.points), np.cos(np.pi * g.points), g.points**2])
        signal = rng.standard_normal((15, 3)) * np.array([10.0, 5.0, 2.0]) @ basis
        c = center(CurveSet(g, signal + rng.normal(0, 0.01, (15, 25))))
        once = denoise_kl(c, 0.9)
        twice = denoise_kl(once, 0.9)
        assert np.abs(twice.values - once.values).max() < 1e-10

    def test_recovers_leading_subspace_of_design_sample(self, unit_grid_1001):
        # Denoising should land near the best rank-L approximation of the
        # latent curves, much closer than the raw noise floor.
        from lfpca import build_basis

        design = design_a(seed=13)
        noisy, latent, _ = generate(design, 250, unit_grid_1001)
        noisy_c, latent_c = center(noisy), center(latent)
        den = denoise_kl(noisy_c, 0.99)
        basis3 = build_basis(design, unit_grid_1001)[:3]
        w = unit_grid_1001.weights
        best3 = (latent_c.values @ (w[:, None] * basis3.T)) @ basis3
        mse_raw = np.mean((noisy_c.values - latent_c.values) ** 2)
        mse_den_vs_best = np.mean((den.values - best3) ** 2)
        assert mse_den_vs_best < mse_raw

    @pytest.mark.xfail(
        reason="at 99% retained variance the truncation discards ~0.385 of "
        "genuine high-frequency variance while the additive noise carries "
        "only ~0.01, so denoised curves sit farther from the latent ones "
        "than the raw observations do",
        strict=True,
    )
    def test_denoised_closer_to_latent_than_raw(self, unit_grid_1001):
        noisy, latent, _ = generate(design_a(seed=13), 250, unit_grid_1001)
        noisy_c, latent_c = center(noisy), center(latent)
        den = denoise_kl(noisy_c, 0.99)
        mse_raw = np.mean((noisy_c.values - latent_c.values) ** 2)
        mse_den = np.mean((den.values - latent_c.values) ** 2)
        assert mse_den < mse_raw


class TestWeightedEigh:
    def test_quadrature_orthonormal(self):
        rng = np.random.default_rng(7)
        g = make_uniform_grid(20, 0.0, 1.0)
        m = rng.standard_normal((20, 20))
        vals, funcs = weighted_eigh((m @ m.T), g.weights)
        gram = funcs.T @ (g.weights[:, None] * funcs)
        assert np.abs(gram - np.eye(20)).max() < 1e-8
        assert np.all(np.diff(vals) <= 0)

    def test_sign_convention(self):
        g = make_uniform_grid(3, 0.0, 1.0)
        _, funcs = weighted_eigh(np.diag([1.0, 2.0, 3.0]), g.weights)
        for j in range(3):
            i = np.argmax(np.abs(funcs[:, j]))
            assert funcs[i, j] > 0

    def test_relative_floor_zeroes_dust(self):
        g = make_uniform_grid(3, 0.0, 1.0)
        vals, _ = weighted_eigh(np.diag([1.0, 1e-14, 0.0]), g.weights)
        assert vals[0] > 0
        assert vals[1] == 0.0 and vals[2] == 0.0


class TestDetectionCovariance:
    def test_combines_raw_diag_with_denoised_offdiag(self):
        rng = np.random.default_rng(9)
        g = make_uniform_grid(15, 0.0, 1.0)
        c = center(CurveSet(g, rng.standard_normal((30, 15))))
        raw = empirical_covariance(c)
        den = empirical_covariance(denoise_kl(c, 0.8))
        mixed = detection_covariance(raw, den)
        assert np.allclose(np.diag(mixed.entries), np.diag(raw.entries))
        off = ~np.eye(15, dtype=bool)
        assert np.allclose(mixed.entries[off], den.entries[off])

    def test_stays_positive_semidefinite(self):
        rng = np.random.default_rng(10)
        g = make_uniform_grid(12, 0.0, 1.0)
        c = center(CurveSet(g, rng.standard_normal((25, 12))))
        raw = empirical_covariance(c)
        den = empirical_covariance(denoise_kl(c, 0.7))
        mixed = detection_covariance(raw, den)
        assert np.linalg.eigvalsh(mixed.entries).min() > -1e-10
