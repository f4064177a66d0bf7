"""Hazard logistic MLE: likelihood calculus, recovery, and prediction rule."""

import numpy as np
import pytest

from distresskit.classifiers import (
    HazardModel,
    _augment,
    hazard_fit,
    hazard_predict,
    hazard_predict_batch,
    load_model,
    log_likelihood,
    log_likelihood_gradient,
    log_likelihood_hessian,
    save_model,
)
from distresskit.errors import (
    DimensionMismatch,
    InsufficientData,
    Separation,
)


def planted_dataset(seed=12345, n=20000, beta=(0.5, -1.0, 2.0)):
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta)
    x = rng.standard_normal((n, len(beta) - 1))
    z = beta[0] + x @ beta[1:]
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(float)
    return x, y


class TestFit:
    def test_recovers_planted_coefficients(self):
        x, y = planted_dataset()
        model = hazard_fit(x, y)
        assert model.beta == pytest.approx([0.5, -1.0, 2.0], abs=0.1)

    def test_symmetric_data_zero_intercept(self):
        # Symmetric design with symmetric label noise forces the intercept
        # to zero; a noise-free version would be perfectly separated.
        x = np.array([[-1.0]] * 100 + [[1.0]] * 100)
        y = np.array([0.0] * 90 + [1.0] * 10 + [1.0] * 90 + [0.0] * 10)
        model = hazard_fit(x, y)
        assert model.beta[0] == pytest.approx(0.0, abs=1e-9)

    def test_perfect_separation_raises(self):
        x = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        with pytest.raises(Separation):
            hazard_fit(x, y)

    def test_single_class_rejected(self):
        x = np.zeros((5, 1))
        with pytest.raises(InsufficientData):
            hazard_fit(x, np.ones(5))

    def test_fit_dominates_null(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = rng.standard_normal((200, 3))
            y = (rng.random(200) < 0.4).astype(float)
            model = hazard_fit(x, y)
            assert model.log_lik_fit >= model.log_lik_null - 1e-9

    def test_null_likelihood_matches_scalar_optimizer(self):
        from scipy.optimize import minimize_scalar

        x, y = planted_dataset(n=2000)
        model = hazard_fit(x, y)
        ones = np.ones((len(y), 1))
        best = minimize_scalar(
            lambda b: -log_likelihood(np.array([b]), ones, y), bounds=(-5, 5), method="bounded"
        )
        assert model.log_lik_null == pytest.approx(-best.fun, abs=1e-7)


class TestLikelihoodCalculus:
    def test_gradient_matches_finite_differences(self):
        x, y = planted_dataset(seed=77, n=400)
        x_aug = _augment(x)
        rng = np.random.default_rng(99)
        h = 1e-5
        for _ in range(10):
            beta = rng.uniform(-1.5, 1.5, size=3)
            grad = log_likelihood_gradient(beta, x_aug, y)
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                numeric = (
                    log_likelihood(beta + e, x_aug, y) - log_likelihood(beta - e, x_aug, y)
                ) / (2 * h)
                assert numeric == pytest.approx(grad[j], rel=1e-6, abs=1e-8)

    def test_hessian_matches_finite_differences(self):
        x, y = planted_dataset(seed=78, n=400)
        x_aug = _augment(x)
        rng = np.random.default_rng(100)
        h = 1e-5
        for _ in range(10):
            beta = rng.uniform(-1.5, 1.5, size=3)
            hess = log_likelihood_hessian(beta, x_aug, y)
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                numeric = (
                    log_likelihood_gradient(beta + e, x_aug, y)
                    - log_likelihood_gradient(beta - e, x_aug, y)
                ) / (2 * h)
                assert numeric == pytest.approx(hess[:, j], rel=1e-6, abs=1e-8)


class TestPredict:
    def model(self, beta):
        return HazardModel(
            feature_names=tuple(f"x{i}" for i in range(len(beta) - 1)),
            beta=np.asarray(beta, dtype=float),
            log_lik_fit=-1.0,
            log_lik_null=-2.0,
            n=10,
            n_iter=1,
        )

    def test_probability_half_is_class_zero(self):
        # beta. x == 0 gives pi = 0.5; the rule is strict inequality.
        assert hazard_predict(self.model([0.0, 1.0]), np.array([0.0])) == 0

    def test_saturated_probability_is_class_one(self):
        assert hazard_predict(self.model([0.0, 1.0]), np.array([50.0])) == 1

    def test_logistic_three(self):
        # Intercept-first beta (0, 1) with augmented input (1, 3):
        # pi = logistic(3) = 0.9526 > 0.5.
        model = self.model([0.0, 1.0])
        assert hazard_predict(model, np.array([3.0])) == 1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            hazard_predict(self.model([0.0, 1.0]), np.array([1.0, 2.0]))

    def test_batch_agrees_with_scalar(self):
        x, y = planted_dataset(n=500)
        model = hazard_fit(x, y)
        queries = x[:50]
        batch = hazard_predict_batch(model, queries)
        singles = [hazard_predict(model, q) for q in queries]
        assert batch.tolist() == singles

    def test_deterministic(self):
        x, y = planted_dataset(n=500)
        model = hazard_fit(x, y)
        q = x[7]
        assert hazard_predict(model, q) == hazard_predict(model, q)


def test_serialization_roundtrip(tmp_path):
    x, y = planted_dataset(n=500)
    model = hazard_fit(x, y, feature_names=("WC", "RE"))
    path = tmp_path / "hazard.json"
    save_model(model, path)
    loaded = load_model(path)
    assert isinstance(loaded, HazardModel)
    assert loaded.beta == pytest.approx(model.beta)
    assert loaded.feature_names == ("WC", "RE")
