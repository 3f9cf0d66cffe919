"""Beta-variational autoencoder on ELU MLPs with hand-derived gradients.

The encoder's final layer has width 2d and is split into (mu, logvar); the
decoder maps d -> input_dim and is deterministic. Training minimizes
rec + beta * KL with rec the per-feature mean squared error and KL the
divergence to the standard normal prior, one reparametrization sample per
input per epoch, optimized with Adam. Public array arguments follow the
dataset convention: samples are columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import (AdamState, MlpArchitecture, TrainConfig, TrainingDiverged, adam_step,
                 batch_slices, clone_params, init_mlp, mlp_backward, mlp_forward,
                 mlp_forward_cached, param_count)

__all__ = [
    "MlpArchitecture", "TrainConfig", "TrainingDiverged", "TrainHistory", "VaeModel",
    "init_vae", "encode", "reparameterize", "decode", "vae_loss", "vae_loss_and_grads",
    "train_vae", "rank_latents", "param_count",
]


@dataclass
class TrainHistory:
    """Per-epoch totals of the composite loss and its two terms."""

    total: np.ndarray
    rec: np.ndarray
    kl: np.ndarray

    def __post_init__(self):
        self.total = np.asarray(self.total, dtype=np.float64)
        self.rec = np.asarray(self.rec, dtype=np.float64)
        self.kl = np.asarray(self.kl, dtype=np.float64)
        if not (len(self.total) == len(self.rec) == len(self.kl)):
            raise ValueError("history arrays must have equal length")


@dataclass
class VaeModel:
    arch_enc: MlpArchitecture
    arch_dec: MlpArchitecture
    encoder: list[tuple[np.ndarray, np.ndarray]]
    decoder: list[tuple[np.ndarray, np.ndarray]]
    d: int
    beta: float

    @property
    def input_dim(self) -> int:
        return self.arch_enc.input_dim

    def parameter_count(self) -> int:
        return param_count(self.encoder) + param_count(self.decoder)


def init_vae(arch_enc: MlpArchitecture, arch_dec: MlpArchitecture, d: int, beta: float,
             seed: int = 0) -> VaeModel:
    """Deterministically initialize a VAE; the logvar head starts at zero so sigma = 1."""
    if d < 1:
        raise ValueError("latent dimension must be >= 1")
    if beta < 0 or not np.isfinite(beta):
        raise ValueError(f"beta must be finite and >= 0, got {beta}")
    if arch_enc.output_dim != 2 * d:
        raise ValueError(f"encoder output width {arch_enc.output_dim} != 2*d = {2 * d}")
    if arch_dec.input_dim != d:
        raise ValueError(f"decoder input width {arch_dec.input_dim} != d = {d}")
    if arch_dec.output_dim != arch_enc.input_dim:
        raise ValueError("decoder output width must equal encoder input width")
    rng = np.random.default_rng(seed)
    encoder = init_mlp(arch_enc, rng)
    decoder = init_mlp(arch_dec, rng)
    w_last, _ = encoder[-1]
    w_last[:, d:] = 0.0
    return VaeModel(arch_enc=arch_enc, arch_dec=arch_dec, encoder=encoder, decoder=decoder,
                    d=d, beta=beta)


def _to_rows(x: np.ndarray, dim: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ValueError(f"{what} length {x.shape[0]} != expected {dim}")
        return x[None, :], True
    if x.ndim != 2 or x.shape[0] != dim:
        raise ValueError(f"{what} must be ({dim},) or ({dim}, k), got {x.shape}")
    return x.T, False


def encode(model: VaeModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map input vector (or columns) to (mu, logvar), each of width d."""
    rows, was_vector = _to_rows(x, model.input_dim, "input")
    out = mlp_forward(model.encoder, rows)
    mu, logvar = out[:, :model.d], out[:, model.d:]
    if was_vector:
        return mu[0], logvar[0]
    return mu.T, logvar.T


def reparameterize(mu: np.ndarray, logvar: np.ndarray, rng: np.random.Generator | None = None,
                   eps: np.ndarray | None = None) -> np.ndarray:
    """z = mu + exp(logvar / 2) * eps with eps ~ N(0, 1) drawn from rng unless given."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ValueError(f"mu shape {mu.shape} != logvar shape {logvar.shape}")
    if eps is None:
        if rng is None:
            raise ValueError("provide either rng or eps")
        eps = rng.standard_normal(mu.shape)
    return mu + np.exp(0.5 * logvar) * np.asarray(eps, dtype=np.float64)


def decode(model: VaeModel, z: np.ndarray, decoder=None) -> np.ndarray:
    """Deterministically map latent vector (or columns) to the reconstruction."""
    rows, was_vector = _to_rows(z, model.d, "latent")
    out = mlp_forward(model.decoder if decoder is None else decoder, rows)
    return out[0] if was_vector else out.T


def _kl_rows(mu: np.ndarray, logvar: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(mu**2 + np.exp(logvar) - logvar - 1.0, axis=1)


def vae_loss(x: np.ndarray, x_tilde: np.ndarray, mu: np.ndarray, logvar: np.ndarray,
             beta: float) -> tuple[float, float, float]:
    """(total, rec, kl) with rec = mean_i ||x_i - x~_i||^2 / dim and kl the mean KL divergence."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64).T)
    x_tilde = np.atleast_2d(np.asarray(x_tilde, dtype=np.float64).T)
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64).T)
    logvar = np.atleast_2d(np.asarray(logvar, dtype=np.float64).T)
    if x.shape != x_tilde.shape or mu.shape != logvar.shape or len(x) != len(mu):
        raise ValueError("inconsistent shapes")
    for arr in (x, x_tilde, mu, logvar):
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite loss inputs")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    rec = float(np.mean(np.sum((x - x_tilde) ** 2, axis=1))) / x.shape[1]
    kl = float(np.mean(_kl_rows(mu, logvar)))
    return rec + beta * kl, rec, kl


def vae_loss_and_grads(model: VaeModel, x_cols: np.ndarray, eps_cols: np.ndarray, beta: float):
    """Composite loss and analytic parameter gradients for a batch of sample columns.

    eps_cols fixes the reparametrization draw (d x k), which makes the value
    differentiable and directly checkable against finite differences.
    Returns (total, rec, kl, encoder_grads, decoder_grads).
    """
    x, _ = _to_rows(x_cols, model.input_dim, "input")
    eps, _ = _to_rows(eps_cols, model.d, "eps")
    if len(eps) != len(x):
        raise ValueError("eps sample count must match input sample count")
    n, dim = x.shape

    enc_out, enc_caches = mlp_forward_cached(model.encoder, x)
    mu, logvar = enc_out[:, :model.d], enc_out[:, model.d:]
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * eps
    dec_out, dec_caches = mlp_forward_cached(model.decoder, z)

    diff = dec_out - x
    rec = float(np.sum(diff**2)) / (n * dim)
    kl = float(np.mean(_kl_rows(mu, logvar)))
    total = rec + beta * kl

    dec_grads, dz = mlp_backward(model.decoder, dec_caches, 2.0 * diff / (n * dim))
    dmu = dz + beta * mu / n
    dlogvar = 0.5 * dz * eps * sigma + beta * 0.5 * (sigma**2 - 1.0) / n
    enc_grads, _ = mlp_backward(model.encoder, enc_caches, np.concatenate([dmu, dlogvar], axis=1))
    return total, rec, kl, enc_grads, dec_grads


def train_vae(model: VaeModel, data: np.ndarray, config: TrainConfig) -> tuple[VaeModel, TrainHistory]:
    """Train encoder and decoder jointly; returns a new model and the loss history.

    data holds standardized samples as columns. Deterministic per config.seed
    under serial execution; one eps draw per input per epoch. Raises
    TrainingDiverged (with the epoch index) if the loss turns non-finite.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] == 0:
        raise ValueError("data must be a nonempty (input_dim, n) matrix")
    if data.shape[0] != model.input_dim:
        raise ValueError(f"data feature count {data.shape[0]} != model input {model.input_dim}")
    x_all = data.T.copy()
    n = len(x_all)
    trained = VaeModel(arch_enc=model.arch_enc, arch_dec=model.arch_dec,
                       encoder=clone_params(model.encoder), decoder=clone_params(model.decoder),
                       d=model.d, beta=model.beta)
    enc_state, dec_state = AdamState(trained.encoder), AdamState(trained.decoder)
    rng = np.random.default_rng(config.seed)
    totals, recs, kls = [], [], []
    for epoch in range(config.epochs):
        eps_all = rng.standard_normal((n, model.d))
        tot_sum = rec_sum = kl_sum = 0.0
        for sl in batch_slices(n, config.batch_size):
            k = sl.stop - sl.start
            total, rec, kl, enc_grads, dec_grads = vae_loss_and_grads(
                trained, x_all[sl].T, eps_all[sl].T, model.beta)
            adam_step(trained.encoder, enc_grads, enc_state, config)
            adam_step(trained.decoder, dec_grads, dec_state, config)
            tot_sum += total * k
            rec_sum += rec * k
            kl_sum += kl * k
        if not np.isfinite(tot_sum):
            raise TrainingDiverged(epoch, f"loss became non-finite (total sum {tot_sum})")
        totals.append(tot_sum / n)
        recs.append(rec_sum / n)
        kls.append(kl_sum / n)
    return trained, TrainHistory(total=totals, rec=recs, kl=kls)


def rank_latents(model: VaeModel, data: np.ndarray) -> list[int]:
    """Order latent indices by how much zeroing each one degrades reconstruction.

    For each latent, the encoder mean of that coordinate is zeroed before
    decoding and the reconstruction RMSE over all entries is measured; indices
    are sorted by descending RMSE, ties broken by lower index.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] == 0:
        raise ValueError("data must be a nonempty (input_dim, n) matrix")
    mu, _ = encode(model, data)
    errors = np.empty(model.d)
    for j in range(model.d):
        knocked = mu.copy()
        knocked[j, :] = 0.0
        recon = decode(model, knocked)
        errors[j] = np.sqrt(np.mean((data - recon) ** 2))
    return sorted(range(model.d), key=lambda j: (-errors[j], j))
