"""PCA pre-processing: orthonormal basis fit, projection to principal coordinates, reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NULL_VARIANCE_RATIO = 1e-14


@dataclass
class PcaBasis:
    """Row-wise mean, orthonormal components (features x rank) and component variances."""

    mean: np.ndarray
    components: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).ravel()
        self.components = np.asarray(self.components, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64).ravel()
        q, r = self.components.shape
        if q != self.mean.shape[0] or r != self.variances.shape[0]:
            raise ValueError("inconsistent basis dimensions")
        if np.any(np.diff(self.variances) > 0):
            raise ValueError("variances must be nonincreasing")
        if np.any(self.variances < 0):
            raise ValueError("variances must be nonnegative")

    @property
    def rank(self) -> int:
        return self.components.shape[1]

    def null_component_mask(self) -> np.ndarray:
        """Components whose variance is numerically null relative to the largest."""
        top = self.variances[0] if self.rank else 0.0
        return self.variances < NULL_VARIANCE_RATIO * top


def pca_fit(values: np.ndarray, rank: int | None = None) -> PcaBasis:
    """Fit mean and principal components of a features-by-samples matrix.

    Uses a thin SVD of the centered matrix; variances are the eigenvalues of
    the Bessel-corrected feature covariance B Bᵀ / (n - 1). Default rank keeps
    all min(q, n) components. Component signs are fixed so each component's
    largest-magnitude entry is positive.
    """
    X = np.asarray(values, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D features-by-samples matrix")
    q, n = X.shape
    if n < 2:
        raise ValueError("need at least 2 samples")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite entries")
    r_full = min(q, n)
    if rank is None:
        rank = r_full
    if not (1 <= rank <= r_full):
        raise ValueError(f"rank must be in [1, {r_full}], got {rank}")

    mean = X.mean(axis=1)
    centered = X - mean[:, None]
    components, singular, _ = np.linalg.svd(centered, full_matrices=False)
    variances = np.maximum(singular**2 / (n - 1), 0.0)
    components = components[:, :rank]
    variances = variances[:rank]

    peak = np.argmax(np.abs(components), axis=0)
    signs = np.sign(components[peak, np.arange(rank)])
    signs[signs == 0] = 1.0
    return PcaBasis(mean=mean, components=components * signs, variances=variances)


def pca_transform(basis: PcaBasis, samples: np.ndarray) -> np.ndarray:
    """Project sample columns onto the basis: coords = Vᵀ (x - mean)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] != basis.mean.shape[0]:
        raise ValueError(f"expected {basis.mean.shape[0]} features, got {samples.shape[0]}")
    if samples.ndim == 1:
        return basis.components.T @ (samples - basis.mean)
    return basis.components.T @ (samples - basis.mean[:, None])


def pca_inverse(basis: PcaBasis, coords: np.ndarray) -> np.ndarray:
    """Reconstruct sample columns from principal coordinates: x = V coords + mean."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape[0] != basis.rank:
        raise ValueError(f"expected {basis.rank} coordinates, got {coords.shape[0]}")
    if coords.ndim == 1:
        return basis.components @ coords + basis.mean
    return basis.components @ coords + basis.mean[:, None]
