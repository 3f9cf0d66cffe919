"""Fully connected network core: ELU MLP forward/backward, Adam, MSE training loop.

Parameters are lists of (W, b) with W shaped (fan_in, fan_out); batches are
row-major (samples x features). Everything is float64 and deterministic for a
fixed seed under serial execution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TrainingDiverged(RuntimeError):
    """Raised when a training loss turns non-finite; carries the epoch index."""

    def __init__(self, epoch: int, message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer layout: ELU on hidden layers, identity on the output layer."""

    input_dim: int
    hidden_sizes: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("all layer sizes must be >= 1")

    def layer_dims(self) -> list[int]:
        return [self.input_dim, *self.hidden_sizes, self.output_dim]


@dataclass(frozen=True)
class TrainConfig:
    """Adam settings; batch_size None means full-batch."""

    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 2000
    batch_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        # lr 0 is allowed as an explicit no-op (used by fine-tuning tests)
        if self.learning_rate < 0 or not np.isfinite(self.learning_rate):
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("adam_eps must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1 when given")


def elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_deriv(pre: np.ndarray) -> np.ndarray:
    return np.where(pre > 0, 1.0, np.exp(np.minimum(pre, 0.0)))


def init_mlp(arch: MlpArchitecture, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Fan-in-scaled uniform weights (bound sqrt(6/fan_in)), zero biases."""
    params = []
    dims = arch.layer_dims()
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weight = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params.append((weight, np.zeros(fan_out)))
    return params


def mlp_forward(params, x: np.ndarray) -> np.ndarray:
    out, _ = mlp_forward_cached(params, x)
    return out


def mlp_forward_cached(params, x: np.ndarray):
    """Forward pass keeping (input activation, pre-activation) per layer for backprop."""
    a = np.asarray(x, dtype=np.float64)
    caches = []
    last = len(params) - 1
    for i, (weight, bias) in enumerate(params):
        pre = a @ weight + bias
        caches.append((a, pre))
        a = pre if i == last else elu(pre)
    return a, caches


def mlp_backward(params, caches, grad_out: np.ndarray):
    """Backprop grad_out (dL/d output) through the net; returns (grads, dL/d input)."""
    grads = [None] * len(params)
    delta = np.asarray(grad_out, dtype=np.float64)
    for i in reversed(range(len(params))):
        a_in, pre = caches[i]
        if i != len(params) - 1:
            delta = delta * _elu_deriv(pre)
        grads[i] = (a_in.T @ delta, delta.sum(axis=0))
        delta = delta @ params[i][0].T
    return grads, delta


def param_count(params) -> int:
    return sum(w.size + b.size for w, b in params)


def clone_params(params) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(w.copy(), b.copy()) for w, b in params]


class AdamState:
    """First/second moment accumulators for one parameter list."""

    def __init__(self, params):
        self.m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
        self.v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
        self.t = 0


def adam_step(params, grads, state: AdamState, config: TrainConfig) -> None:
    """One in-place Adam update over a parameter list."""
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    corr1 = 1.0 - b1**state.t
    corr2 = 1.0 - b2**state.t
    for i, ((w, b), (gw, gb)) in enumerate(zip(params, grads)):
        mw, mb = state.m[i]
        vw, vb = state.v[i]
        mw *= b1
        mw += (1 - b1) * gw
        mb *= b1
        mb += (1 - b1) * gb
        vw *= b2
        vw += (1 - b2) * gw**2
        vb *= b2
        vb += (1 - b2) * gb**2
        w -= config.learning_rate * (mw / corr1) / (np.sqrt(vw / corr2) + config.adam_eps)
        b -= config.learning_rate * (mb / corr1) / (np.sqrt(vb / corr2) + config.adam_eps)


def batch_slices(n: int, batch_size: int | None):
    """Sequential batch slices; the whole set when batch_size is None."""
    if batch_size is None or batch_size >= n:
        return [slice(0, n)]
    return [slice(s, min(s + batch_size, n)) for s in range(0, n, batch_size)]


def train_mlp_mse(params, inputs: np.ndarray, targets: np.ndarray,
                  config: TrainConfig) -> tuple[list, list[float]]:
    """Train an MLP on mean squared error: mean over samples of ||t - f(x)||^2 / out_dim.

    Returns updated parameter copies and the per-epoch loss history. The input
    parameters are not mutated. Raises TrainingDiverged on a non-finite loss.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.shape[0] != targets.shape[0] or inputs.shape[0] == 0:
        raise ValueError("inputs/targets must be nonempty with matching sample counts")
    params = clone_params(params)
    state = AdamState(params)
    n, out_dim = targets.shape
    history = []
    for epoch in range(config.epochs):
        epoch_loss = 0.0
        for sl in batch_slices(n, config.batch_size):
            x, t = inputs[sl], targets[sl]
            out, caches = mlp_forward_cached(params, x)
            diff = out - t
            loss = float(np.sum(diff**2)) / (len(x) * out_dim)
            grads, _ = mlp_backward(params, caches, 2.0 * diff / (len(x) * out_dim))
            adam_step(params, grads, state, config)
            epoch_loss += loss * len(x)
        epoch_loss /= n
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(epoch, f"MSE loss became {epoch_loss}")
        history.append(epoch_loss)
    return params, history
