import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracle import normal_density
from robust_kalman import SingularMatrixError
from robust_kalman.mixture_estimation import (
    DegenerateFitError,
    EmSettings,
    InsufficientDataError,
    NoiseMixtureEstimate,
    effective_covariance,
    fit_gmm2,
    gmm_pdf,
    single_gaussian_estimate,
    tg_factor,
)
from robust_kalman.noise_lab import RandomStream, benchmark_mixture, sample_gaussian, sample_mixture


def mixture(weight_s, cov_s, cov_b):
    return NoiseMixtureEstimate.from_components(weight_s, cov_s, cov_b)


BENCH = mixture(0.9, 0.1 * np.eye(2), 10 * np.eye(2))


class TestGmmPdf:
    def test_standard_normal_peak(self):
        est = mixture(1.0, np.eye(2), np.eye(2))
        assert gmm_pdf([0.0, 0.0], est) == pytest.approx(1 / (2 * math.pi), rel=1e-14)

    def test_identical_components_collapse(self, rng):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        u = rng.standard_normal(2)
        assert gmm_pdf(u, mixture(0.5, cov, cov)) == pytest.approx(
            gmm_pdf(u, mixture(1.0, cov, cov)), rel=1e-14
        )

    def test_benchmark_mixture_at_origin(self):
        # frozen from two independent normal-density evaluations
        assert gmm_pdf([0.0, 0.0], BENCH) == pytest.approx(1.4339860372579767, rel=1e-13)

    def test_matches_direct_density(self, rng):
        for _ in range(20):
            u = rng.standard_normal(2) * 3
            want = 0.9 * normal_density(u, np.zeros(2), 0.1 * np.eye(2)) + 0.1 * normal_density(
                u, np.zeros(2), 10 * np.eye(2)
            )
            assert gmm_pdf(u, BENCH) == pytest.approx(want, rel=1e-12)

    def test_singular_covariance(self):
        with pytest.raises(SingularMatrixError):
            gmm_pdf([0.0, 0.0], mixture(1.0, np.zeros((2, 2)), np.eye(2)))


class TestTgFactor:
    def test_benchmark_configuration(self):
        assert tg_factor(BENCH) == pytest.approx(400 / (3 + math.exp(9)), rel=1e-13)
        assert tg_factor(BENCH) == pytest.approx(0.049346, abs=1e-6)

    def test_all_impulsive_recovers_big_covariance(self):
        est = mixture(0.0, 0.1 * np.eye(2), 10 * np.eye(2))
        assert tg_factor(est) == pytest.approx(100.0, rel=1e-14)
        np.testing.assert_allclose(effective_covariance(est), 10 * np.eye(2), rtol=1e-14)

    def test_equal_components(self):
        r = np.array([[1.0, 0.2], [0.2, 0.5]])
        est = mixture(0.0, r, r)
        assert tg_factor(est) == pytest.approx(1.0, rel=1e-14)
        np.testing.assert_allclose(effective_covariance(est), r, rtol=1e-14)

    def test_effective_covariance_benchmark(self):
        np.testing.assert_allclose(
            effective_covariance(BENCH), 400 / (3 + math.exp(9)) * 0.1 * np.eye(2), rtol=1e-13
        )
        assert effective_covariance(BENCH)[0, 0] == pytest.approx(0.0049346, abs=1e-7)

    def test_strictly_decreasing_in_p(self):
        values = [tg_factor(mixture(p / 10, 0.1 * np.eye(2), 10 * np.eye(2))) for p in range(11)]
        assert all(a > b for a, b in zip(values, values[1:]))

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-3, 1e3), st.floats(0.0, 1.0))
    def test_scale_invariance(self, c, p):
        cov_s = np.array([[0.2, 0.05], [0.05, 0.1]])
        cov_b = np.array([[9.0, 1.0], [1.0, 12.0]])
        base = tg_factor(mixture(p, cov_s, cov_b))
        assert tg_factor(mixture(p, c * cov_s, c * cov_b)) == pytest.approx(base, rel=1e-10)

    def test_scalar_reduces_to_ratio(self):
        est = mixture(0.5, [[2.0]], [[8.0]])
        assert tg_factor(est) == pytest.approx(4 * 2.0 / (3 + math.exp(5)), rel=1e-14)


@pytest.fixture(scope="module")
def bench_fit():
    draw = sample_mixture(benchmark_mixture(), 5000, RandomStream(7, 0))
    return fit_gmm2(draw.samples, EmSettings(n_restarts=5, seed=11))


class TestFitGmm2:
    def test_recovers_benchmark_mixture(self, bench_fit):
        assert 0.87 <= bench_fit.weight_s <= 0.93
        assert abs(np.linalg.det(bench_fit.cov_s) / 0.01 - 1) <= 0.20
        assert abs(np.linalg.det(bench_fit.cov_b) / 100.0 - 1) <= 0.30

    def test_em_ascent(self, bench_fit):
        trace = np.array(bench_fit.log_likelihood_trace)
        assert len(trace) >= 2
        assert np.all(np.diff(trace) >= -1e-8)
        assert bench_fit.log_likelihood == trace[-1]

    def test_labels_and_weights(self, bench_fit):
        assert np.linalg.det(bench_fit.cov_s) <= np.linalg.det(bench_fit.cov_b)
        assert bench_fit.weight_s + bench_fit.weight_b == pytest.approx(1.0, abs=1e-9)

    def test_single_gaussian_data(self):
        x = sample_gaussian(np.eye(2), 3000, RandomStream(3, 0))
        try:
            est = fit_gmm2(x, EmSettings(seed=5))
        except DegenerateFitError:
            return
        pooled = (
            est.weight_s * (est.cov_s + np.outer(est.mean_s, est.mean_s))
            + est.weight_b * (est.cov_b + np.outer(est.mean_b, est.mean_b))
        )
        mean = est.weight_s * est.mean_s + est.weight_b * est.mean_b
        pooled -= np.outer(mean, mean)
        assert np.linalg.norm(pooled - np.eye(2)) / np.linalg.norm(np.eye(2)) <= 0.15

    def test_deterministic(self):
        x = sample_mixture(benchmark_mixture(), 400, RandomStream(1, 2)).samples
        a = fit_gmm2(x, EmSettings(seed=99))
        b = fit_gmm2(x, EmSettings(seed=99))
        assert a.log_likelihood == b.log_likelihood
        np.testing.assert_array_equal(a.cov_s, b.cov_s)
        np.testing.assert_array_equal(a.cov_b, b.cov_b)
        assert a.weight_s == b.weight_s

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.2, 0.95))
    def test_labeling_and_ascent_property(self, seed, p):
        spec = benchmark_mixture(p_gauss=p)
        x = sample_mixture(spec, 300, RandomStream(seed, 0)).samples
        try:
            est = fit_gmm2(x, EmSettings(seed=seed, n_restarts=2))
        except DegenerateFitError:
            return
        assert np.linalg.det(est.cov_s) <= np.linalg.det(est.cov_b)
        assert np.all(np.diff(est.log_likelihood_trace) >= -1e-8)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            fit_gmm2(np.zeros((19, 2)))

    def test_zero_spread_is_degenerate(self):
        with pytest.raises(DegenerateFitError):
            fit_gmm2(np.ones((50, 2)))

    def test_one_dimensional_samples(self):
        x = sample_mixture(benchmark_mixture(var_small=0.1, var_big=10.0), 2000, RandomStream(4, 0)).samples[:, 0]
        est = fit_gmm2(x, EmSettings(seed=1))
        assert est.dim == 1
        assert 0.8 <= est.weight_s <= 0.97

    def test_single_gaussian_fallback(self, rng):
        x = rng.standard_normal((100, 2))
        est = single_gaussian_estimate(x)
        assert est.weight_s == 1.0
        np.testing.assert_array_equal(est.cov_s, est.cov_b)
