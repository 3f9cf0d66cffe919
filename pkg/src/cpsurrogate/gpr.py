"""Gaussian-process regression with a product linear x Matern-3/2 ARD kernel.

Each output dimension gets an independent single-output GP. Hyperparameters
(per-input linear weights, Matern variance, per-input lengthscales, noise
variance) are fitted by multi-start gradient ascent on the log marginal
likelihood in log-parameter space, with Cholesky factorizations and jitter
escalation for numerical safety.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

SQRT3 = math.sqrt(3.0)
NOISE_FLOOR = 1e-8
_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
_HARD_LOG_BOUND = math.log(1e6)


class IndefiniteKernelError(RuntimeError):
    """Gram matrix failed to factorize even after jitter escalation."""


class GprFitError(RuntimeError):
    """All optimizer restarts failed for at least one output."""


@dataclass
class KernelParams:
    """Hyperparameters of the product kernel, ARD on both factors."""

    linear_weights: np.ndarray
    matern_variance: float
    matern_lengthscales: np.ndarray
    noise_variance: float

    def __post_init__(self):
        self.linear_weights = np.asarray(self.linear_weights, dtype=np.float64).ravel()
        self.matern_lengthscales = np.asarray(self.matern_lengthscales, dtype=np.float64).ravel()
        if self.linear_weights.shape != self.matern_lengthscales.shape:
            raise ValueError("linear weights and lengthscales must share the input dimension")
        ok = (np.all(np.isfinite(self.linear_weights)) and np.all(self.linear_weights >= 0)
              and np.isfinite(self.matern_variance) and self.matern_variance > 0
              and np.all(np.isfinite(self.matern_lengthscales)) and np.all(self.matern_lengthscales > 0)
              and np.isfinite(self.noise_variance) and self.noise_variance >= NOISE_FLOOR)
        if not ok:
            raise ValueError("invalid kernel hyperparameters")

    @property
    def input_dim(self) -> int:
        return len(self.linear_weights)


@dataclass(frozen=True)
class GprOptConfig:
    """Multi-start ascent settings; restart draws are log-uniform over the given ranges."""

    restarts: int = 8
    max_iters: int = 200
    seed: int = 0
    amplitude_range: tuple[float, float] = (1e-2, 1e2)
    noise_range: tuple[float, float] = (NOISE_FLOOR, 1e-1)

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1:
            raise ValueError("restarts and max_iters must be >= 1")
        if self.noise_range[0] < NOISE_FLOOR or self.noise_range[0] > self.noise_range[1]:
            raise ValueError(f"noise range must sit within [{NOISE_FLOOR}, inf)")
        if self.amplitude_range[0] <= 0 or self.amplitude_range[0] > self.amplitude_range[1]:
            raise ValueError("bad amplitude range")


@dataclass
class GprModel:
    """Fitted per-output GPs sharing normalized inputs; immutable after fit."""

    inputs: np.ndarray                 # (n, D) normalized training inputs
    targets: np.ndarray                # (n, d)
    params: list[KernelParams]
    chols: list[np.ndarray]            # lower Cholesky factors of K + noise*I
    alpha: np.ndarray                  # (n, d) weight vectors
    norm_lo: np.ndarray
    norm_hi: np.ndarray
    jitters: list[float] = field(default_factory=list)

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def normalize(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim}-dimensional inputs, got {points.shape[1]}")
        return (points - self.norm_lo) / (self.norm_hi - self.norm_lo)


def kernel_matrix(params: KernelParams, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Cross-covariance matrix k(p1_i, p2_j) of the product kernel."""
    p1 = np.atleast_2d(np.asarray(p1, dtype=np.float64))
    p2 = np.atleast_2d(np.asarray(p2, dtype=np.float64))
    # (p1_d * p2_d) * w_d keeps k(p, p') bitwise symmetric in its arguments
    linear = (p1[:, None, :] * p2[None, :, :]) @ params.linear_weights
    scaled = (p1[:, None, :] - p2[None, :, :]) / params.matern_lengthscales
    rho = np.sqrt(np.sum(scaled**2, axis=2))
    matern = params.matern_variance * (1.0 + SQRT3 * rho) * np.exp(-SQRT3 * rho)
    return linear * matern


def kernel_eval(params: KernelParams, p: np.ndarray, p2: np.ndarray) -> float:
    return float(kernel_matrix(params, np.asarray(p)[None, :], np.asarray(p2)[None, :])[0, 0])


def kernel_diag(params: KernelParams, points: np.ndarray) -> np.ndarray:
    """k(p, p) = (sum_j w_j p_j^2) * matern_variance."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return (points**2 @ params.linear_weights) * params.matern_variance


def _chol_with_jitter(gram: np.ndarray) -> tuple[np.ndarray, float]:
    for jitter in _JITTERS:
        try:
            return np.linalg.cholesky(gram + jitter * np.eye(len(gram))), jitter
        except np.linalg.LinAlgError:
            continue
    raise IndefiniteKernelError(
        f"Gram matrix ({len(gram)}x{len(gram)}) not positive definite, max jitter {_JITTERS[-1]}")


def log_marginal_likelihood(params: KernelParams, inputs: np.ndarray, y: np.ndarray) -> float:
    """Log marginal likelihood via triangular factorization of K + noise*I."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n = len(inputs)
    gram = kernel_matrix(params, inputs, inputs) + params.noise_variance * np.eye(n)
    lower, _ = _chol_with_jitter(gram)
    alpha = cho_solve((lower, True), y)
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(lower))) - 0.5 * n * math.log(2 * math.pi))


# --- log-space hyperparameter vector: [log w_1..D, log sv, log l_1..D, log sn] ---

def _theta_to_params(theta: np.ndarray, dim: int) -> KernelParams:
    vals = np.exp(theta)
    return KernelParams(linear_weights=vals[:dim], matern_variance=float(vals[dim]),
                        matern_lengthscales=vals[dim + 1:2 * dim + 1],
                        noise_variance=float(max(vals[-1], NOISE_FLOOR)))


def params_to_theta(params: KernelParams) -> np.ndarray:
    return np.log(np.concatenate([params.linear_weights, [params.matern_variance],
                                  params.matern_lengthscales, [params.noise_variance]]))


def log_ml_and_grad(params: KernelParams, inputs: np.ndarray,
                    y: np.ndarray) -> tuple[float, np.ndarray]:
    """Log marginal likelihood and its gradient w.r.t. the log-hyperparameter vector."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n, dim = inputs.shape
    w, sv = params.linear_weights, params.matern_variance
    ls, sn = params.matern_lengthscales, params.noise_variance

    linear = (inputs[:, None, :] * inputs[None, :, :]) @ w
    scaled = (inputs[:, None, :] - inputs[None, :, :]) / ls
    rho = np.sqrt(np.sum(scaled**2, axis=2))
    decay = np.exp(-SQRT3 * rho)
    matern = sv * (1.0 + SQRT3 * rho) * decay
    kmat = linear * matern
    lower, _ = _chol_with_jitter(kmat + sn * np.eye(n))
    alpha = cho_solve((lower, True), y)
    value = float(-0.5 * y @ alpha - np.sum(np.log(np.diag(lower))) - 0.5 * n * math.log(2 * math.pi))

    # dL/dtheta_k = 0.5 tr((alpha alpha^T - A^-1) dA/dtheta_k)
    inv = cho_solve((lower, True), np.eye(n))
    outer = np.outer(alpha, alpha) - inv
    grad = np.empty(2 * dim + 2)
    for j in range(dim):
        dk = (w[j] * np.outer(inputs[:, j], inputs[:, j])) * matern
        grad[j] = 0.5 * np.sum(outer * dk)
    grad[dim] = 0.5 * np.sum(outer * kmat)
    for j in range(dim):
        dk = linear * (3.0 * sv * decay * scaled[:, :, j] ** 2)
        grad[dim + 1 + j] = 0.5 * np.sum(outer * dk)
    grad[-1] = 0.5 * sn * np.trace(outer)
    return value, grad


def _clamp_theta(theta: np.ndarray, opt: GprOptConfig) -> np.ndarray:
    theta = np.clip(theta, -_HARD_LOG_BOUND, _HARD_LOG_BOUND)
    theta[-1] = np.clip(theta[-1], math.log(opt.noise_range[0]), math.log(opt.noise_range[1]))
    return theta


def _ascend(theta: np.ndarray, inputs: np.ndarray, y: np.ndarray, dim: int,
            opt: GprOptConfig) -> tuple[np.ndarray, float]:
    """Backtracking gradient ascent on the log marginal likelihood in log space."""
    noise_pinned = opt.noise_range[0] == opt.noise_range[1]

    def value_grad(th):
        val, grad = log_ml_and_grad(_theta_to_params(th, dim), inputs, y)
        if noise_pinned:
            grad[-1] = 0.0
        return val, grad

    def value_only(th):
        try:
            return log_marginal_likelihood(_theta_to_params(th, dim), inputs, y)
        except IndefiniteKernelError:
            return -np.inf

    theta = _clamp_theta(theta.copy(), opt)
    best_val, grad = value_grad(theta)
    step = 0.5
    for _ in range(opt.max_iters):
        gnorm_sq = float(grad @ grad)
        if math.sqrt(gnorm_sq) < 1e-8:
            break
        trial_step = step
        accepted = False
        for _ in range(40):
            candidate = _clamp_theta(theta + trial_step * grad, opt)
            cand_val = value_only(candidate)
            if np.isfinite(cand_val) and cand_val >= best_val + 1e-4 * trial_step * gnorm_sq:
                accepted = True
                break
            trial_step *= 0.5
        if not accepted:
            break
        theta = candidate
        best_val, grad = value_grad(theta)
        step = min(trial_step * 2.0, 10.0)
    return theta, best_val


def _draw_theta(rng: np.random.Generator, dim: int, opt: GprOptConfig) -> np.ndarray:
    lo, hi = np.log(opt.amplitude_range[0]), np.log(opt.amplitude_range[1])
    amp = rng.uniform(lo, hi, size=2 * dim + 1)
    noise = rng.uniform(math.log(opt.noise_range[0]), math.log(opt.noise_range[1]))
    return np.concatenate([amp, [noise]])


def gpr_fit(inputs: np.ndarray, targets: np.ndarray, opt: GprOptConfig | None = None,
            bounds: tuple[np.ndarray, np.ndarray] | None = None) -> GprModel:
    """Fit independent GPs from raw inputs to each target column.

    Inputs are mapped to the unit box using `bounds` (lo, hi per input
    dimension; training min/max when omitted). Each output's hyperparameters
    are the best of `opt.restarts` gradient-ascent runs with deterministic
    restart seeds derived from (opt.seed, output index, restart index).
    """
    opt = opt or GprOptConfig()
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    n, dim = inputs.shape
    if n < 2:
        raise ValueError("need at least 2 training points")
    if targets.shape[0] != n:
        raise ValueError("inputs/targets sample counts differ")
    if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
        raise ValueError("non-finite training data")
    if bounds is None:
        lo, hi = inputs.min(axis=0), inputs.max(axis=0)
    else:
        lo = np.asarray(bounds[0], dtype=np.float64).ravel()
        hi = np.asarray(bounds[1], dtype=np.float64).ravel()
    if np.any(hi <= lo):
        raise ValueError("degenerate normalization bounds")
    normalized = (inputs - lo) / (hi - lo)

    params_list, chols, alphas, jitters = [], [], [], []
    for k in range(targets.shape[1]):
        y = targets[:, k]
        best: tuple[float, np.ndarray] | None = None
        failures = []
        for r in range(opt.restarts):
            rng = np.random.default_rng([opt.seed, k, r])
            try:
                theta, val = _ascend(_draw_theta(rng, dim, opt), normalized, y, dim, opt)
            except IndefiniteKernelError as exc:
                failures.append(f"restart {r}: {exc}")
                continue
            if np.isfinite(val) and (best is None or val > best[0]):
                best = (val, theta)
        if best is None:
            raise GprFitError(f"output {k}: all {opt.restarts} restarts failed: {failures}")
        params = _theta_to_params(best[1], dim)
        gram = kernel_matrix(params, normalized, normalized) + params.noise_variance * np.eye(n)
        lower, jitter = _chol_with_jitter(gram)
        params_list.append(params)
        chols.append(lower)
        alphas.append(cho_solve((lower, True), y))
        jitters.append(jitter)
    return GprModel(inputs=normalized, targets=targets, params=params_list, chols=chols,
                    alpha=np.column_stack(alphas), norm_lo=lo, norm_hi=hi, jitters=jitters)


def gpr_predict(model: GprModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predictive means and variances at raw query points, shape (m, d) each.

    Variances follow the exact conditional covariance diagonal (no observation
    noise); values in (-1e-10, 0) arising from roundoff are clamped to zero.
    """
    query = model.normalize(points)
    m = len(query)
    means = np.empty((m, model.output_dim))
    variances = np.empty((m, model.output_dim))
    for k in range(model.output_dim):
        params = model.params[k]
        cross = kernel_matrix(params, query, model.inputs)
        means[:, k] = cross @ model.alpha[:, k]
        v = solve_triangular(model.chols[k], cross.T, lower=True)
        var = kernel_diag(params, query) - np.sum(v**2, axis=0)
        if np.any(var <= -1e-10):
            raise RuntimeError(f"output {k}: predictive variance fell below -1e-10")
        variances[:, k] = np.maximum(var, 0.0)
    return means, variances
