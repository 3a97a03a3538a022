import numpy as np
import pytest

from aeromon.errors import UnderdeterminedError
from aeromon.predictor import fit_least_squares, predict, transform_set


def synthetic_affine(gen, n=200, d=18, noise=0.0):
    M0 = gen.normal(size=(6, d))
    mu0 = gen.normal(size=6)
    X = gen.normal(size=(n, d))
    Y = X @ M0.T + mu0 + noise * gen.normal(size=(n, 6))
    return M0, mu0, X, Y


class TestFit:
    def test_exact_recovery_on_noiseless_data(self):
        gen = np.random.default_rng(0)
        M0, mu0, X, Y = synthetic_affine(gen)
        model = fit_least_squares(X, Y)
        assert np.max(np.abs(model.M - M0)) < 1e-8
        assert np.max(np.abs(model.mu - mu0)) < 1e-8

    def test_constant_targets_fold_into_offset(self):
        gen = np.random.default_rng(1)
        X = gen.normal(size=(100, 18))
        c = np.array([1.0, -2.0, 3.0, 0.5, 0.0, 7.0])
        Y = np.tile(c, (100, 1))
        model = fit_least_squares(X, Y)
        assert np.max(np.abs(model.M)) < 1e-8
        np.testing.assert_allclose(model.mu, c, atol=1e-8)

    def test_residual_mean_is_zero(self):
        gen = np.random.default_rng(2)
        _, _, X, Y = synthetic_affine(gen, noise=0.5)
        model = fit_least_squares(X, Y)
        residuals = Y - transform_set(model, X)
        assert np.max(np.abs(residuals.mean(axis=0))) < 1e-9

    def test_residuals_orthogonal_to_features(self):
        gen = np.random.default_rng(3)
        _, _, X, Y = synthetic_affine(gen, noise=0.5)
        model = fit_least_squares(X, Y)
        residuals = Y - transform_set(model, X)
        cross = residuals.T @ X
        scale = np.linalg.norm(residuals) * np.linalg.norm(X)
        assert np.max(np.abs(cross)) / scale < 1e-6

    def test_perturbing_solution_never_reduces_objective(self):
        gen = np.random.default_rng(4)
        _, _, X, Y = synthetic_affine(gen, n=120, noise=0.8)
        model = fit_least_squares(X, Y)
        best = np.sum((Y - transform_set(model, X)) ** 2)
        for _ in range(50):
            dM = gen.normal(size=model.M.shape)
            dmu = gen.normal(size=6)
            norm = np.sqrt(np.sum(dM ** 2) + np.sum(dmu ** 2))
            dM, dmu = 1e-3 * dM / norm, 1e-3 * dmu / norm
            perturbed = np.sum((Y - (X @ (model.M + dM).T + (model.mu + dmu))) ** 2)
            assert perturbed >= best - 1e-12

    def test_underdetermined_rejected(self):
        gen = np.random.default_rng(5)
        X = gen.normal(size=(18, 18))  # need at least d + 1 = 19
        Y = gen.normal(size=(18, 6))
        with pytest.raises(UnderdeterminedError):
            fit_least_squares(X, Y)

    def test_ridge_flag_on_collinear_features(self):
        gen = np.random.default_rng(6)
        base = gen.normal(size=(100, 2))
        # 18 features spanned by 2 directions: covariance is rank 2.
        mix = gen.normal(size=(2, 18))
        X = base @ mix
        Y = gen.normal(size=(100, 6))
        model = fit_least_squares(X, Y)
        assert model.ridge_applied
        assert np.all(np.isfinite(model.M))

    def test_training_summary(self):
        gen = np.random.default_rng(7)
        _, _, X, Y = synthetic_affine(gen, n=150, noise=0.3)
        model = fit_least_squares(X, Y)
        assert model.n_pairs == 150
        assert model.rms_residual.shape == (6,)
        assert np.all(model.rms_residual > 0)
        assert not model.ridge_applied


class TestPredict:
    def _model(self):
        gen = np.random.default_rng(8)
        _, _, X, Y = synthetic_affine(gen)
        return fit_least_squares(X, Y)

    def test_zero_matrix_returns_offset(self):
        model = self._model()
        zeroed = type(model)(M=np.zeros_like(model.M), mu=model.mu,
                             n_pairs=model.n_pairs, rms_residual=model.rms_residual)
        o = np.random.default_rng(9).normal(size=18)
        np.testing.assert_array_equal(predict(zeroed, o), model.mu)

    def test_zero_observation_returns_offset(self):
        model = self._model()
        np.testing.assert_array_equal(predict(model, np.zeros(18)), model.mu)

    def test_affinity(self):
        model = self._model()
        gen = np.random.default_rng(10)
        o1, o2 = gen.normal(size=18), gen.normal(size=18)
        for a in (0.0, 0.25, 0.5, 1.0, -0.3):
            lhs = predict(model, a * o1 + (1 - a) * o2)
            rhs = a * predict(model, o1) + (1 - a) * predict(model, o2)
            np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            predict(self._model(), np.zeros(17))


class TestTransformSet:
    def _model(self):
        gen = np.random.default_rng(11)
        _, _, X, Y = synthetic_affine(gen)
        return fit_least_squares(X, Y)

    def test_empty_input(self):
        out = transform_set(self._model(), np.zeros((0, 18)))
        assert out.shape == (0, 6)

    def test_singleton_matches_predict(self):
        model = self._model()
        o = np.random.default_rng(12).normal(size=18)
        np.testing.assert_array_equal(transform_set(model, o[None, :])[0], predict(model, o))

    def test_order_preserved(self):
        model = self._model()
        obs = np.random.default_rng(13).normal(size=(25, 18))
        batch = transform_set(model, obs)
        for i in (0, 7, 24):
            np.testing.assert_allclose(batch[i], predict(model, obs[i]), rtol=0, atol=1e-12)
