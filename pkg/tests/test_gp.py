import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from peermatch.gp import (
    FitError,
    GpFitConfig,
    GpModel,
    GpRegressor,
    KernelParams,
    covariance_matrix,
    fit_gp,
    load_model,
    log_marginal_likelihood,
    mll_gradient,
    predict,
    rbf,
    save_model,
)
from scipy.linalg import cho_solve
from oracles import dense_mll, dense_covariance, dense_predict, finite_difference_gradient

P = KernelParams(signal_variance=1.0, lengthscale=1.0, noise_variance=0.1)


class TestKernelParams:
    @pytest.mark.parametrize("bad", [(0.0, 1, 1), (1, -2, 1), (1, 1, float("nan")), (1, float("inf"), 1)])
    def test_rejects_nonpositive_or_nonfinite(self, bad):
        with pytest.raises(ValueError):
            KernelParams(*bad)

    def test_log_round_trip(self):
        p = KernelParams(2.0, 0.5, 0.01)
        q = KernelParams.from_log_vector(p.log_vector())
        assert (q.signal_variance, q.lengthscale, q.noise_variance) == pytest.approx(
            (2.0, 0.5, 0.01)
        )


class TestRbf:
    def test_zero_distance_gives_signal_variance(self):
        x = np.array([0.3, -2.0])
        assert rbf(x, x, P) == pytest.approx(P.signal_variance)

    def test_unit_case_e_minus_one(self):
        # |xi - xj|^2 = 2 with unit signal and lengthscale: exp(-1)
        xi, xj = np.array([0.0, 0.0]), np.array([1.0, 1.0])
        assert rbf(xi, xj, KernelParams(1.0, 1.0, 0.1)) == pytest.approx(math.exp(-1.0))

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal(5), rng.standard_normal(5)
        assert rbf(a, b, P) == rbf(b, a, P)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            rbf(np.zeros(3), np.zeros(4), P)

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
    def test_bounded_by_signal_variance(self, a, b):
        value = rbf(np.array(a), np.array(b), P)
        assert 0.0 < value <= P.signal_variance + 1e-15


class TestCovariance:
    def test_single_point(self):
        K = covariance_matrix(np.array([[1.0, 2.0]]), P)
        assert K.shape == (1, 1)
        assert K[0, 0] == pytest.approx(P.signal_variance + P.noise_variance)

    def test_duplicate_rows_stay_positive_definite(self):
        X = np.array([[1.0], [1.0]])
        K = covariance_matrix(X, P)
        assert K[0, 1] == pytest.approx(P.signal_variance)
        assert np.all(np.linalg.eigvalsh(K) > 0)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(42)
        X = rng.standard_normal((5, 3))
        assert np.allclose(covariance_matrix(X, P), dense_covariance(X, P), atol=1e-12)

    def test_diagonal_exact_and_symmetric(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((7, 2))
        K = covariance_matrix(X, P)
        assert np.all(np.diag(K) == P.signal_variance + P.noise_variance)
        assert np.array_equal(K, K.T)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            covariance_matrix(np.array([[np.nan]]), P)


class TestLogMarginalLikelihood:
    def test_scalar_zero_target_closed_form(self):
        value = log_marginal_likelihood(np.array([[0.0]]), np.array([0.0]), P)
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi * (P.signal_variance + P.noise_variance)))

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((3, 2))
        y = rng.standard_normal(3)
        assert log_marginal_likelihood(X, y, P) == pytest.approx(dense_mll(X, y, P), abs=1e-8)

    def test_duplicate_training_point_matches_oracle(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((4, 2))
        X = np.vstack([X, X[0]])
        y = rng.standard_normal(5)
        assert log_marginal_likelihood(X, y, P) == pytest.approx(dense_mll(X, y, P), abs=1e-8)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            log_marginal_likelihood(np.zeros((2, 1)), np.zeros(3), P)


class TestGradient:
    def test_matches_central_differences(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            X = rng.standard_normal((6, 2))
            y = rng.standard_normal(6)
            p = KernelParams(*np.exp(rng.uniform(-1, 1, 3)))
            analytic = mll_gradient(X, y, p)
            numeric = finite_difference_gradient(X, y, p)
            rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
            assert rel < 1e-4

    def test_small_gradient_at_optimum(self):
        rng = np.random.default_rng(12)
        X = rng.uniform(0, 4, size=(25, 1))
        model_params = KernelParams(1.0, 0.8, 0.05)
        L = np.linalg.cholesky(covariance_matrix(X, model_params))
        y = L @ rng.standard_normal(25)
        model = fit_gp(X, y, GpFitConfig(seed=0, tol=1e-12, max_iters=600))
        assert float(np.linalg.norm(mll_gradient(X, y, model.params))) < 1e-3

    def test_noise_gradient_positive_when_noise_underestimated(self):
        # Pure white noise fitted with a tiny noise parameter: raising the
        # noise must increase the likelihood, so the log-noise gradient is
        # positive; central differences agree on the sign.
        rng = np.random.default_rng(13)
        X = rng.uniform(0, 10, size=(20, 1))
        y = rng.normal(0.0, 1.0, size=20)
        p = KernelParams(0.05, 0.3, 1e-3)
        analytic = mll_gradient(X, y, p)
        numeric = finite_difference_gradient(X, y, p)
        assert analytic[2] > 0
        assert numeric[2] > 0


def _sample_from(params, X, rng):
    noise_free = covariance_matrix(X, params) - params.noise_variance * np.eye(len(X))
    f = np.linalg.cholesky(noise_free + 1e-10 * np.eye(len(X))) @ rng.standard_normal(len(X))
    return f + rng.normal(0.0, math.sqrt(params.noise_variance), size=len(X))


class TestFit:
    def test_refit_identical(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((12, 2))
        y = rng.standard_normal(12)
        cfg = GpFitConfig(seed=7)
        a = fit_gp(X, y, cfg)
        b = fit_gp(X, y, cfg)
        assert a.params == b.params
        assert a.mll == b.mll

    def test_final_mll_at_least_every_init(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((10, 1))
        y = rng.standard_normal(10)
        cfg = GpFitConfig(seed=3, restarts=3)
        model = fit_gp(X, y, cfg)
        init_rng = np.random.default_rng(cfg.seed)
        inits = [np.log(np.array(cfg.init))] + [init_rng.uniform(-2, 2, 3) for _ in range(cfg.restarts)]
        for theta in inits:
            assert model.mll >= log_marginal_likelihood(X, y, KernelParams.from_log_vector(theta)) - 1e-9

    def test_recovers_known_generator_smoke(self):
        truth = KernelParams(1.0, 0.5, 0.01)
        rng = np.random.default_rng(1000)
        X = np.sort(rng.uniform(0, 5, 40)).reshape(-1, 1)
        y = _sample_from(truth, X, rng)
        model = fit_gp(X, y, GpFitConfig(seed=0))
        err = np.abs(model.params.log_vector() - truth.log_vector()) / math.log(10.0)
        assert np.all(err <= 0.5)

    def test_trace_recorded_on_request(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((8, 1))
        y = rng.standard_normal(8)
        model = fit_gp(X, y, GpFitConfig(seed=1, trace=True))
        assert len(model.trace) >= 2
        mlls = [row[0] for row in model.trace]
        assert mlls == sorted(mlls)
        assert model.trace[-1][0] == pytest.approx(model.mll)

    def test_rejects_bad_input(self):
        with pytest.raises(FitError):
            fit_gp(np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(FitError):
            fit_gp(np.array([[np.inf]]), np.array([1.0]))


class TestPredict:
    def test_far_point_reverts_to_prior(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(0, 1, size=(10, 1))
        y = rng.standard_normal(10)
        model = fit_gp(X, y, GpFitConfig(seed=0, restarts=0, max_iters=0))
        far = predict(model, np.array([1e5]))
        assert far.mean == pytest.approx(0.0, abs=1e-9)
        assert far.variance == pytest.approx(
            model.params.signal_variance + model.params.noise_variance, abs=1e-9
        )

    def test_noise_free_limit_interpolates(self):
        X = np.array([[0.0], [1.0], [2.5]])
        y = np.array([0.5, -0.2, 0.9])
        gaps = []
        for noise in (1e-1, 1e-3, 1e-5, 1e-7):
            params = KernelParams(1.0, 1.0, noise)
            K = covariance_matrix(X, params)
            L = np.linalg.cholesky(K)
            model = GpModel(X=X, y=y, params=params, L=L, alpha=cho_solve((L, True), y), jitter=0.0, mll=0.0)
            gaps.append(max(abs(predict(model, x).mean - t) for x, t in zip(X, y)))
        assert gaps == sorted(gaps, reverse=True)
        assert gaps[-1] < 1e-6

    def test_two_point_closed_form(self):
        # Hand-solved 2x2 posterior: K = [[s+n, k12], [k12, s+n]], explicit inverse.
        s, n, ls = 1.0, 0.1, 1.0
        x1, x2, xs = 0.0, 1.0, 0.4
        y = np.array([1.0, -1.0])
        k12 = s * math.exp(-((x1 - x2) ** 2) / (2 * ls**2))
        a, b = s + n, k12
        det = a * a - b * b
        inv = np.array([[a, -b], [-b, a]]) / det
        ks = np.array(
            [s * math.exp(-((xs - x1) ** 2) / (2 * ls**2)), s * math.exp(-((xs - x2) ** 2) / (2 * ls**2))]
        )
        want_mean = float(ks @ inv @ y)
        want_var = float(s - ks @ inv @ ks + n)

        params = KernelParams(s, ls, n)
        X = np.array([[x1], [x2]])
        K = covariance_matrix(X, params)
        L = np.linalg.cholesky(K)
        model = GpModel(X=X, y=y, params=params, L=L, alpha=cho_solve((L, True), y), jitter=0.0, mll=0.0)
        got = predict(model, np.array([xs]))
        assert got.mean == pytest.approx(want_mean, abs=1e-12)
        assert got.variance == pytest.approx(want_var, abs=1e-12)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((12, 3))
        y = rng.standard_normal(12)
        K = covariance_matrix(X, P)
        L = np.linalg.cholesky(K)
        gp_model = GpModel(X=X, y=y, params=P, L=L, alpha=cho_solve((L, True), y), jitter=0.0, mll=0.0)
        for _ in range(5):
            xs = rng.standard_normal(3)
            got = predict(gp_model, xs)
            want_mean, want_var = dense_predict(X, y, P, xs)
            assert got.mean == pytest.approx(want_mean, abs=1e-8)
            assert got.variance == pytest.approx(want_var, abs=1e-8)

    def test_variance_within_prior_bounds(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((15, 2))
        y = rng.standard_normal(15)
        model = fit_gp(X, y, GpFitConfig(seed=0, restarts=1, max_iters=40))
        p = model.params
        for _ in range(50):
            pred = predict(model, rng.standard_normal(2) * 3)
            assert p.noise_variance - 1e-9 <= pred.variance <= p.signal_variance + p.noise_variance + 1e-9

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((5, 2))
        model = fit_gp(X, rng.standard_normal(5), GpFitConfig(seed=0, restarts=0, max_iters=1))
        with pytest.raises(ValueError, match="shape"):
            predict(model, np.zeros(3))


class TestSnapshot:
    def test_round_trip_reproduces_predictions(self, tmp_path):
        rng = np.random.default_rng(14)
        X = rng.standard_normal((9, 2))
        y = rng.standard_normal(9)
        model = fit_gp(X, y, GpFitConfig(seed=2, restarts=1, max_iters=60))
        save_model(model, tmp_path / "model.json")
        loaded = load_model(tmp_path / "model.json")
        for _ in range(10):
            xs = rng.standard_normal(2)
            a, b = predict(model, xs), predict(loaded, xs)
            assert abs(a.mean - b.mean) <= 1e-12
            assert abs(a.variance - b.variance) <= 1e-12

    def test_rejects_unknown_format(self, tmp_path):
        (tmp_path / "bad.json").write_text('{"format": "other/9"}', "utf-8")
        with pytest.raises(ValueError, match="format"):
            load_model(tmp_path / "bad.json")


def test_cached_factor_reconstructs_covariance():
    rng = np.random.default_rng(21)
    X = rng.standard_normal((14, 3))
    y = rng.standard_normal(14)
    model = fit_gp(X, y, GpFitConfig(seed=0, restarts=0, max_iters=25))
    K = covariance_matrix(X, model.params) + model.jitter * np.eye(14)
    assert np.allclose(model.L @ model.L.T, K, atol=1e-10)


def test_regressor_interface():
    rng = np.random.default_rng(15)
    X = rng.standard_normal((10, 2))
    y = rng.standard_normal(10)
    fitted = GpRegressor(GpFitConfig(seed=0, restarts=0, max_iters=20)).fit(X, y)
    pred = fitted.predict(X[0])
    assert math.isfinite(pred.mean) and pred.variance > 0
