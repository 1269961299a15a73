"""Tests for model fitting: factorization, GLS mean, likelihoods and MLE."""

import logging
import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

import gp_model
from errors import ConfigurationError, InputError, SingularModelError
from gp_model import (
    LOG_2PI,
    FitOptions,
    RestartOutcome,
    check_distinct,
    closest_pair,
    factorize,
    fit_fixed,
    initial_simplex,
    load_model,
    log_likelihood,
    mle_fit,
    profile_loglik,
    save_model,
)
from kernels import KernelSpec, cov_matrix


class TestFitFixed:
    def test_single_observation(self):
        model = fit_fixed([[0.3]], [2.5], KernelSpec(theta=(1.0,)))
        assert model.beta == pytest.approx(2.5)
        np.testing.assert_allclose(model.alpha, 0.0, atol=1e-15)

    def test_far_apart_points_give_sample_mean(self):
        X = np.array([[0.0], [100.0], [200.0], [300.0]])
        y = np.array([1.0, 2.0, 4.0, 9.0])
        model = fit_fixed(X, y, KernelSpec(theta=(1.0,)))
        assert model.beta == pytest.approx(4.0, rel=1e-12)

    def test_gls_mean_matches_dense_solve(self, rng):
        X = rng.random((6, 2))
        y = rng.normal(size=6)
        spec = KernelSpec(theta=(0.4, 0.6), nu=1.5, sigma2=2.0)
        model = fit_fixed(X, y, spec)
        K = cov_matrix(spec, X)
        ones = np.ones(6)
        expected = (ones @ np.linalg.solve(K, y)) / (ones @ np.linalg.solve(K, ones))
        assert model.beta == pytest.approx(expected, rel=1e-10)

    def test_factor_reproduces_covariance(self, rng, model_factory):
        model = model_factory(rng, n=12, d=3)
        L = model.chol
        K = cov_matrix(model.spec, model.X) + model.jitter_used * np.eye(model.n)
        assert np.abs(L @ L.T - K).max() <= 1e-8 * model.spec.sigma2
        np.testing.assert_allclose(K @ model.alpha, model.y - model.beta, atol=1e-8)

    def test_interpolates_training_data(self, rng, model_factory):
        model = model_factory(rng, n=10, d=2)
        K = cov_matrix(model.spec, model.X)
        np.testing.assert_allclose(model.beta + K @ model.alpha, model.y, atol=1e-8)

    def test_translation_shifts_mean_only(self, rng):
        X = rng.random((7, 2))
        y = rng.normal(size=7)
        spec = KernelSpec(theta=(0.3, 0.3))
        base = fit_fixed(X, y, spec)
        shifted = fit_fixed(X, y + 5.0, spec)
        assert shifted.beta == pytest.approx(base.beta + 5.0, rel=1e-12)
        np.testing.assert_allclose(shifted.alpha, base.alpha, atol=1e-9)

    def test_known_beta_is_kept(self, rng):
        X = rng.random((5, 1))
        model = fit_fixed(X, rng.normal(size=5), KernelSpec(theta=(0.2,)), beta=1.25)
        assert model.beta == 1.25

    def test_duplicate_rows_rejected(self):
        with pytest.raises(InputError, match="rows 0 and 2"):
            fit_fixed([[0.1, 0.2], [0.5, 0.5], [0.1, 0.2]], [1.0, 2.0, 3.0], KernelSpec(theta=(0.3, 0.3)))

    def test_duplicate_tolerance_follows_design_span(self):
        base = 1e-3 * np.array([[0.0], [0.5], [1.0]])
        check_distinct(np.vstack([base, [[0.5e-3 + 5e-14]]]))
        with pytest.raises(InputError, match="rows 1 and 3"):
            check_distinct(np.vstack([base, [[0.5e-3 + 5e-16]]]))
        with pytest.raises(InputError):
            check_distinct(np.array([[0.2, 0.2], [0.2, 0.2]]))


    def test_shape_errors(self):
        with pytest.raises(InputError):
            fit_fixed([[0.1], [0.2]], [1.0], KernelSpec(theta=(0.3,)))
        with pytest.raises(InputError):
            fit_fixed([[0.1, 0.2]], [1.0], KernelSpec(theta=(0.3,)))
        with pytest.raises(InputError):
            fit_fixed([[0.1], [0.2]], [1.0, np.nan], KernelSpec(theta=(0.3,)))


class TestFactorize:
    def test_jitter_escalation_logs_warning(self, caplog):
        X = np.array([[0.0], [1e-9]])
        spec = KernelSpec(theta=(1.0,))
        with caplog.at_level(logging.WARNING, logger="gp_model"):
            model = fit_fixed(X, [1.0, 1.0], spec)
        assert 0 < model.jitter_used <= 1e-6 * spec.sigma2
        assert "jitter" in caplog.text

    def test_indefinite_matrix_names_closest_pair(self):
        K = np.array([[1.0, 2.0], [2.0, 1.0]])
        X = np.array([[0.0], [0.5]])
        with pytest.raises(SingularModelError, match="rows 0 and 1"):
            factorize(K, 1.0, X)

    def test_closest_pair(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [0.9, 1.0], [5.0, 5.0]])
        i, j, dist = closest_pair(X)
        assert (i, j) == (1, 2)
        assert dist == pytest.approx(0.1)


class TestLogLikelihood:
    def test_single_point_at_mean(self):
        value = log_likelihood([[0.0]], [0.0], KernelSpec(theta=(1.0,)), beta=0.0)
        assert value == pytest.approx(-0.5 * LOG_2PI, rel=1e-14)

    def test_matches_multivariate_normal(self, rng):
        X = rng.random((4, 2))
        y = rng.normal(size=4)
        spec = KernelSpec(theta=(0.5, 0.8), nu=2.5, sigma2=1.5)
        expected = multivariate_normal(mean=np.full(4, 0.3), cov=cov_matrix(spec, X)).logpdf(y)
        assert log_likelihood(X, y, spec, beta=0.3) == pytest.approx(expected, rel=1e-10)

    def test_quadratic_term_scales_with_square(self, rng):
        X = rng.random((6, 2))
        r = rng.normal(size=6)
        spec = KernelSpec(theta=(0.4, 0.4))
        beta = 1.0
        at_mean = log_likelihood(X, np.full(6, beta), spec, beta)
        quad = -2.0 * (log_likelihood(X, beta + r, spec, beta) - at_mean)
        quad_scaled = -2.0 * (log_likelihood(X, beta + 3.0 * r, spec, beta) - at_mean)
        assert quad_scaled == pytest.approx(9.0 * quad, rel=1e-10)

    def test_profile_estimates_are_stationary(self, rng):
        X = rng.random((10, 2))
        y = rng.normal(size=10)
        theta = (0.3, 0.5)
        _, beta_hat, sigma2_hat = profile_loglik(X, y, 2.5, theta)
        best = log_likelihood(X, y, KernelSpec(theta=theta, sigma2=sigma2_hat), beta_hat)
        for s_factor, b_shift in [(1.05, 0.0), (0.95, 0.0), (1.0, 0.05), (1.0, -0.05)]:
            spec = KernelSpec(theta=theta, sigma2=sigma2_hat * s_factor)
            assert log_likelihood(X, y, spec, beta_hat + b_shift) <= best

    def test_profile_value_matches_full_likelihood(self, rng):
        X = rng.random((8, 2))
        y = rng.normal(size=8)
        profile, beta_hat, sigma2_hat = profile_loglik(X, y, 1.5, (0.4, 0.4))
        full = log_likelihood(X, y, KernelSpec(theta=(0.4, 0.4), nu=1.5, sigma2=sigma2_hat), beta_hat)
        assert profile == pytest.approx(full, rel=1e-9)


class TestMleFit:
    def test_fixed_theta_is_returned_exactly(self, rng):
        X = rng.random((12, 2))
        y = np.sin(4 * X[:, 0]) + X[:, 1]
        model = mle_fit(X, y, 2.5, FitOptions(fixed_theta=(0.3, 0.7)))
        assert model.spec.theta == (0.3, 0.7)
        _, beta_hat, sigma2_hat = profile_loglik(X, y, 2.5, (0.3, 0.7))
        assert model.beta == pytest.approx(beta_hat)
        assert model.spec.sigma2 == pytest.approx(sigma2_hat)

    def test_report_traces_never_decrease(self, rng):
        X = rng.random((15, 2))
        y = np.sin(3 * X[:, 0]) * np.cos(2 * X[:, 1])
        model = mle_fit(X, y, 2.5, FitOptions(n_restarts=4, seed=3))
        report = model.mle_report
        assert len(report.restarts) == 4
        for outcome in report.restarts:
            assert all(b >= a for a, b in zip(outcome.trace, outcome.trace[1:]))
            if outcome.trace:
                assert outcome.trace[-1] == pytest.approx(outcome.loglik)
        if not report.degraded:
            best = report.restarts[report.best_index]
            assert best.loglik == max(r.loglik for r in report.restarts)
            assert best.loglik > report.midpoint_loglik

    def test_theta_within_bounds(self, rng):
        X = rng.random((15, 2))
        y = X[:, 0] ** 2 - X[:, 1]
        bounds = ((0.05, 2.0), (0.05, 2.0))
        model = mle_fit(X, y, 2.5, FitOptions(theta_bounds=bounds, n_restarts=3))
        for t, (lo, hi) in zip(model.spec.theta, bounds):
            assert lo * (1 - 1e-9) <= t <= hi * (1 + 1e-9)

    def test_deterministic_for_seed(self, rng):
        X = rng.random((12, 2))
        y = np.exp(X[:, 0]) - X[:, 1]
        first = mle_fit(X, y, 2.5, FitOptions(n_restarts=3, seed=7))
        second = mle_fit(X, y, 2.5, FitOptions(n_restarts=3, seed=7, workers=2))
        assert first.spec.theta == second.spec.theta
        assert first.beta == second.beta

    def test_degraded_when_no_restart_improves(self, rng, monkeypatch, caplog):
        X = rng.random((10, 1))
        y = np.sin(5 * X[:, 0])

        def failing_search(objective, options, log_bounds, start, index):
            return RestartOutcome(index=index, start=np.exp(start).tolist(),
                                  theta=np.exp(start).tolist(), loglik=-np.inf, n_evals=0)

        monkeypatch.setattr(gp_model, "_local_search", failing_search)
        with caplog.at_level(logging.WARNING, logger="gp_model"):
            model = mle_fit(X, y, 2.5, FitOptions(n_restarts=2))
        assert model.mle_report.degraded
        assert model.mle_report.best_index is None
        np.testing.assert_allclose(model.spec.theta, model.mle_report.midpoint_theta)
        assert "degraded" in caplog.text

    def test_evaluation_counts_match_objective_calls(self, rng, monkeypatch):
        X = rng.random((15, 2))
        y = np.sin(3 * X[:, 0]) + X[:, 1]
        calls = {"profile": 0, "distinct": 0}
        profile = gp_model._profile_from_lags
        distinct = gp_model.check_distinct

        def counting_profile(*args, **kwargs):
            calls["profile"] += 1
            return profile(*args, **kwargs)

        def counting_distinct(X):
            calls["distinct"] += 1
            return distinct(X)

        monkeypatch.setattr(gp_model, "_profile_from_lags", counting_profile)
        monkeypatch.setattr(gp_model, "check_distinct", counting_distinct)
        report = mle_fit(X, y, 2.5, FitOptions(n_restarts=1, seed=0)).mle_report
        outcome = report.restarts[0]
        # midpoint baseline and the final profile are the two calls outside the search
        assert calls["profile"] == outcome.n_evals + 2
        assert outcome.n_evals > len(outcome.trace)
        assert calls["distinct"] <= 3

    def test_max_iter_caps_each_restart(self, rng):
        X = rng.random((15, 2))
        y = np.cos(4 * X[:, 0]) * X[:, 1]
        report = mle_fit(X, y, 2.5, FitOptions(n_restarts=2, max_iter=5)).mle_report
        for outcome in report.restarts:
            assert len(outcome.trace) <= 5
            # d + 1 starting vertices, then at most 2 + d evaluations per iteration
            assert outcome.n_evals <= 3 + 5 * 4

    def test_initial_simplex_spans_the_box(self):
        log_bounds = np.log(np.array([[0.01, 10.0], [0.1, 1.0], [0.02, 20.0]]))
        start = np.array([log_bounds[0, 1] - 0.1, log_bounds[1, 0], np.mean(log_bounds[2])])
        simplex = initial_simplex(start, log_bounds, 0.25)
        width = log_bounds[:, 1] - log_bounds[:, 0]
        assert simplex.shape == (4, 3)
        np.testing.assert_array_equal(simplex[0], start)
        for j in range(3):
            moved = simplex[j + 1] - start
            assert np.count_nonzero(moved) == 1
            assert abs(moved[j]) == pytest.approx(0.25 * width[j])
            assert log_bounds[j, 0] <= simplex[j + 1, j] <= log_bounds[j, 1]
        assert simplex[1, 0] < start[0]

    def test_leaves_flat_start_in_many_dimensions(self):
        rng = np.random.default_rng(11)
        X = rng.random((40, 8))
        y = np.sin(2 * np.pi * X[:, 0]) + X[:, 1]
        options = FitOptions(n_restarts=2, seed=1, warm_start=True, max_iter=300)
        report = mle_fit(X, y, 2.5, options).mle_report
        assert len(report.restarts) == 3
        warm = np.log(report.restarts[2].start)
        log_bounds = np.log(gp_model.default_theta_bounds(X))
        fraction = (warm - log_bounds[:, 0]) / (log_bounds[:, 1] - log_bounds[:, 0])
        np.testing.assert_allclose(fraction, fraction[0], atol=1e-9)
        assert not report.degraded
        for outcome in report.restarts:
            assert outcome.n_evals > 9


    def test_warns_on_few_points(self, rng, caplog):
        X = rng.random((3, 2))
        with caplog.at_level(logging.WARNING, logger="gp_model"):
            mle_fit(X, rng.normal(size=3), 2.5, FitOptions(fixed_theta=(0.5, 0.5)))
        assert "unreliable" in caplog.text

    def test_bad_options(self):
        with pytest.raises(ConfigurationError):
            FitOptions(n_restarts=0)
        with pytest.raises(ConfigurationError):
            FitOptions(theta_bounds=((1.0, 0.5),))
        with pytest.raises(ConfigurationError):
            FitOptions(simplex_scale=0.0)
        with pytest.raises(ConfigurationError):
            FitOptions(max_iter=0)
        with pytest.raises(ConfigurationError):
            mle_fit(np.random.default_rng(0).random((6, 2)), np.arange(6.0), 2.5,
                    FitOptions(theta_bounds=((0.1, 1.0),)))

    def test_consistency_one_dimension(self):
        hits = 0
        for rep in range(20):
            rng = np.random.default_rng(1000 + rep)
            X = np.sort(rng.uniform(0.0, 10.0, size=(60, 1)), axis=0)
            K = cov_matrix(KernelSpec(theta=(1.0,)), X)
            y = np.linalg.cholesky(K + 1e-10 * np.eye(60)) @ rng.standard_normal(60)
            model = mle_fit(X, y, 2.5, FitOptions(n_restarts=5, seed=rep))
            hits += 0.5 <= model.spec.theta[0] <= 2.0
        assert hits >= 18

    @pytest.mark.slow
    def test_recovers_seven_dimensional_truth(self):
        rng = np.random.default_rng(42)
        spec = KernelSpec(theta=(1.0,) * 7)
        X = rng.random((100, 7))
        L = np.linalg.cholesky(cov_matrix(spec, X) + 1e-10 * np.eye(100))
        y = L @ rng.standard_normal(100)
        model = mle_fit(X, y, 2.5, FitOptions(n_restarts=10, seed=0))
        assert all(0.5 <= t <= 2.0 for t in model.spec.theta)
        assert 0.5 <= model.spec.sigma2 <= 1.5


class TestPersistence:
    def test_save_and_load(self, rng, model_factory, tmp_path):
        model = model_factory(rng, n=6, d=2)
        loaded = load_model(save_model(model, tmp_path / "model.json"))
        assert loaded.spec == model.spec
        assert loaded.beta == model.beta
        np.testing.assert_allclose(loaded.alpha, model.alpha, rtol=1e-12)

    def test_malformed_document(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"theta": [0.5]}', encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_model(path)
