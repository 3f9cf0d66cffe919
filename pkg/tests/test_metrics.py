"""Metric definition tests with hand-computed values and invariance properties."""

import math

import numpy as np
import pytest

from cpsurrogate.metrics import compute_report, mae, nrmse_latent, r2, rmse


class TestPointMetrics:
    def test_perfect_prediction(self):
        truth = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert mae(truth, truth) == 0.0
        assert rmse(truth, truth) == 0.0
        assert r2(truth, truth) == 1.0

    def test_constant_mean_prediction_r2_zero(self):
        truth = np.array([1.0, 2.0, 3.0, 6.0])
        pred = np.full(4, truth.mean())
        assert r2(pred, truth) == pytest.approx(0.0, abs=1e-15)

    def test_hand_values(self):
        pred = np.array([0.0, 0.0])
        truth = np.array([1.0, 3.0])
        assert mae(pred, truth) == pytest.approx(2.0)
        assert rmse(pred, truth) == pytest.approx(math.sqrt(5.0))
        assert rmse(pred, truth) == pytest.approx(2.2360, abs=1e-4)

    def test_rmse_not_always_above_mae_shape_independence(self):
        # identical errors: rmse == mae
        pred = np.array([1.0, 1.0])
        truth = np.array([0.0, 0.0])
        assert rmse(pred, truth) == pytest.approx(mae(pred, truth))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        pred = rng.normal(size=20)
        truth = rng.normal(size=20)
        perm = rng.permutation(20)
        assert mae(pred, truth) == pytest.approx(mae(pred[perm], truth[perm]), rel=1e-12)
        assert rmse(pred, truth) == pytest.approx(rmse(pred[perm], truth[perm]), rel=1e-12)
        assert r2(pred, truth) == pytest.approx(r2(pred[perm], truth[perm]), rel=1e-12)

    def test_r2_identity_with_rmse(self):
        rng = np.random.default_rng(1)
        pred = rng.normal(size=(4, 6))
        truth = rng.normal(size=(4, 6))
        ss_tot = np.sum((truth - truth.mean()) ** 2)
        assert r2(pred, truth) == pytest.approx(1 - rmse(pred, truth) ** 2 * truth.size / ss_tot,
                                                rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            mae(np.zeros(2), np.zeros(3))
        with pytest.raises(ValueError):
            rmse(np.zeros(0), np.zeros(0))
        with pytest.raises(ValueError):
            r2(np.zeros(3), np.ones(3))  # zero-variance truth

    def test_report_per_sample(self):
        pred = np.array([[0.0, 1.0], [0.0, 1.0]])
        truth = np.array([[1.0, 1.0], [3.0, 1.0]])
        report = compute_report(pred, truth, per_sample=True)
        np.testing.assert_allclose(report.per_sample_mae, [2.0, 0.0])
        np.testing.assert_allclose(report.per_sample_rmse, [math.sqrt(5.0), 0.0])
        assert report.mae == pytest.approx(1.0)


class TestNrmseLatent:
    def test_zero_for_exact_prediction(self):
        mu = np.array([0.4, -1.0])
        assert nrmse_latent(mu, mu, np.zeros(2)) == 0.0

    def test_hand_value(self):
        value = nrmse_latent(np.array([1.0, 0.0]), np.array([0.0, 0.0]), np.array([0.5, 0.0]))
        assert value == pytest.approx(2.0)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(2)
        mu, mu_hat, mu_bar = rng.normal(size=(3, 4))
        base = nrmse_latent(mu, mu_hat, mu_bar)
        for c in (0.5, -3.0, 1e4):
            assert nrmse_latent(c * mu, c * mu_hat, c * mu_bar) == pytest.approx(base, rel=1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        mu, mu_hat, mu_bar = rng.normal(size=(3, 4))
        shift = rng.normal(size=4)
        base = nrmse_latent(mu, mu_hat, mu_bar)
        assert nrmse_latent(mu + shift, mu_hat + shift, mu_bar + shift) == pytest.approx(base, rel=1e-12)

    def test_undefined_when_sample_equals_mean(self):
        mu = np.array([1.0, 2.0])
        with pytest.raises(ValueError):
            nrmse_latent(mu, mu + 1.0, mu)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nrmse_latent(np.zeros(2), np.zeros(3), np.zeros(2))
