"""Shared fixtures: a small synthetic dataset and a trained desk-miniature bundle."""

import pytest

import cpsurrogate as cp


def small_pipeline_config(use_pca=True, beta=1e-3, latent_dim=2, epochs=400, seed=5):
    return cp.PipelineConfig(
        use_pca=use_pca, latent_dim=latent_dim, beta=beta,
        encoder_hidden=(24, 12), decoder_hidden=(12, 24),
        train=cp.TrainConfig(epochs=epochs, seed=seed),
        gpr=cp.GprOptConfig(restarts=3, max_iters=80, seed=seed + 1))


@pytest.fixture(scope="session")
def small_data():
    grid = cp.GridSpec(10, 6)
    conditions = cp.sample_envelope(36, seed=3)
    return cp.generate_synthetic(grid, conditions, noise_std=0.0, seed=3)


@pytest.fixture(scope="session")
def small_split(small_data):
    return cp.split_dataset(small_data.n_samples, 0.7, seed=1)


@pytest.fixture(scope="session")
def small_bundle(small_data, small_split):
    """A trained PCA-mode bundle shared read-only across tests."""
    return cp.train_surrogate(small_data, small_split, small_pipeline_config())


@pytest.fixture(scope="session")
def small_bundle_raw(small_data, small_split):
    """A trained non-PCA bundle shared read-only across tests."""
    return cp.train_surrogate(small_data, small_split, small_pipeline_config(use_pca=False))
