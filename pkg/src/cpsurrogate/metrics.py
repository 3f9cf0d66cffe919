"""Error metrics: MAE, RMSE, R-squared, and normalized latent prediction error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    """Global metrics over flattened prediction/target pairs, optional per-sample columns."""

    mae: float
    rmse: float
    r2: float
    per_sample_mae: np.ndarray | None = None
    per_sample_rmse: np.ndarray | None = None


def _check_pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty inputs")
    return pred, truth


def mae(pred, truth) -> float:
    pred, truth = _check_pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def rmse(pred, truth) -> float:
    pred, truth = _check_pair(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def r2(pred, truth) -> float:
    """1 - SS_res / SS_tot with SS_tot about the truth's global mean, all entries flattened."""
    pred, truth = _check_pair(pred, truth)
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined: truth has zero variance")
    ss_res = float(np.sum((pred - truth) ** 2))
    return 1.0 - ss_res / ss_tot


def compute_report(pred, truth, per_sample: bool = False) -> MetricsReport:
    """Bundle MAE/RMSE/R^2; per_sample adds per-column breakdowns (samples as columns)."""
    pred, truth = _check_pair(pred, truth)
    report = MetricsReport(mae=mae(pred, truth), rmse=rmse(pred, truth), r2=r2(pred, truth))
    if per_sample:
        diff = np.atleast_2d(pred - truth)
        report.per_sample_mae = np.mean(np.abs(diff), axis=0)
        report.per_sample_rmse = np.sqrt(np.mean(diff**2, axis=0))
    return report


def nrmse_latent(mu, mu_hat, mu_bar) -> float:
    """Latent prediction error ||mu - mu_hat|| normalized by ||mu - mu_bar||.

    mu_bar is the training-set mean latent vector; the normalization measures
    the sample's distance from the center of the latent cloud, making errors
    comparable across latent spaces of different extent.
    """
    mu = np.asarray(mu, dtype=np.float64).ravel()
    mu_hat = np.asarray(mu_hat, dtype=np.float64).ravel()
    mu_bar = np.asarray(mu_bar, dtype=np.float64).ravel()
    if not (mu.shape == mu_hat.shape == mu_bar.shape):
        raise ValueError("mu, mu_hat, mu_bar must have equal length")
    denom = float(np.linalg.norm(mu - mu_bar))
    if denom == 0.0:
        raise ValueError("NRMSE undefined: sample latent equals the mean latent")
    return float(np.linalg.norm(mu - mu_hat)) / denom
