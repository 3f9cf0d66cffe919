"""Acceptance criteria, one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
Criteria 7-11 share one default-configuration run (1152x435 synthetic dataset,
305/130 split, d = 2) trained at module scope; expect several minutes.
"""

import hashlib
import json
import math
import time
from dataclasses import dataclass

import numpy as np
import pytest

import cpsurrogate as cp
from cpsurrogate.cli import main
from cpsurrogate.config import DEFAULT_RUN_CONFIG, load_run_config, pipeline_config_from_run
from cpsurrogate.gpr import NOISE_FLOOR, KernelParams, params_to_theta
from cpsurrogate.vae import vae_loss_and_grads


def report(number: int, name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[criterion {number:02d}] {name}: {status}{suffix}", flush=True)
    assert passed, f"acceptance criterion {number} ({name}) failed{suffix}"


# ---------------------------------------------------------------------------
# the default synthetic run shared by criteria 7-11
# ---------------------------------------------------------------------------

@dataclass
class DeskRun:
    data: object
    split: object
    bundles: dict
    fine_tuned: dict
    train_seconds: float


@pytest.fixture(scope="module")
def desk():
    cfg = load_run_config(None)
    ds = cfg["dataset"]
    grid = cp.GridSpec(ds["n_chord"], ds["n_span"])
    conditions = cp.sample_envelope(ds["n_conditions"], tuple(ds["mach_range"]),
                                    tuple(ds["alpha_range"]), seed=ds["seed"], jitter=ds["jitter"])
    data = cp.generate_synthetic(grid, conditions, noise_std=ds["noise_std"], seed=ds["seed"])
    split = cp.split_dataset(data.n_samples, cfg["split"]["train_fraction"], cfg["split"]["seed"])
    assert data.values.shape == (1152, 435)
    assert (len(split.train), len(split.test)) == (305, 130)

    t0 = time.perf_counter()
    bundles = {}
    for use_pca in (True, False):
        for beta in (1e-3, 1.0):
            pconf = pipeline_config_from_run(cfg, use_pca=use_pca, beta=beta)
            bundles[(use_pca, beta)] = cp.train_surrogate(data, split, pconf)
    train_seconds = time.perf_counter() - t0
    # Table-1 shape contract at desk scale: PCA-mode network input equals the
    # training sample count, non-PCA input equals q
    assert bundles[(True, 1e-3)].rep_dim == 305
    assert bundles[(False, 1e-3)].rep_dim == 1152

    from cpsurrogate.config import train_config_from_section
    tune = train_config_from_section(cfg["finetune"])
    fine_tuned = {key: cp.fine_tune_decoder(bundles[key], data, split, tune)
                  for key in ((True, 1.0), (True, 1e-3))}
    return DeskRun(data=data, split=split, bundles=bundles, fine_tuned=fine_tuned,
                   train_seconds=train_seconds)


def _recon_rmse(bundle, data, indices) -> float:
    truth = data.values[:, indices]
    recon = cp.reconstruct_fields(bundle, truth)
    return float(np.sqrt(np.mean((recon - truth) ** 2)))


def _surrogate_report(bundle, data, indices):
    conditions = [data.conditions[i] for i in indices]
    pred = cp.predict_cp(bundle, conditions).values
    return cp.compute_report(pred, data.values[:, indices])


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_criterion_01_pca_exactness():
    rng = np.random.default_rng(101)
    x = rng.normal(size=(200, 60))
    t0 = time.perf_counter()
    basis = cp.pca_fit(x)
    recon = cp.pca_inverse(basis, cp.pca_transform(basis, x))
    elapsed = time.perf_counter() - t0
    rel = np.linalg.norm(recon - x) / np.linalg.norm(x)
    ortho = np.max(np.abs(basis.components.T @ basis.components - np.eye(basis.rank)))
    report(1, "PCA exactness", rel <= 1e-8 and ortho <= 1e-10 and elapsed < 1.0,
           f"rel {rel:.2e}, ortho {ortho:.2e}, {elapsed * 1e3:.0f} ms")


def test_criterion_02_pca_oracle_equivalence():
    rng = np.random.default_rng(102)
    x = rng.normal(size=(10, 8))
    basis = cp.pca_fit(x)
    centered = x - x.mean(axis=1, keepdims=True)
    eigvals = np.sort(np.linalg.eigvalsh(centered @ centered.T / 7.0))[::-1]
    err = np.max(np.abs(basis.variances - eigvals[:8]))
    report(2, "PCA oracle equivalence", err <= 1e-10, f"max dev {err:.2e}")


def test_criterion_03_vae_gradient_check():
    arch_enc = cp.MlpArchitecture(4, (2,), 4)
    arch_dec = cp.MlpArchitecture(2, (2,), 4)
    model = cp.init_vae(arch_enc, arch_dec, d=2, beta=0.37, seed=103)
    rng = np.random.default_rng(104)
    for params in (model.encoder, model.decoder):
        for w, b in params:
            w += 0.1 * rng.normal(size=w.shape)
            b += 0.1 * rng.normal(size=b.shape)
    x_cols = rng.normal(size=(4, 5))
    eps_cols = rng.normal(size=(2, 5))

    t0 = time.perf_counter()
    _, _, _, enc_grads, dec_grads = vae_loss_and_grads(model, x_cols, eps_cols, 0.37)
    analytic = [g for pair in enc_grads + dec_grads for g in pair]
    h = 1e-5
    worst = 0.0
    position = 0
    for params in (model.encoder, model.decoder):
        for w, b in params:
            for arr in (w, b):
                grad_a = analytic[position]
                position += 1
                flat = arr.ravel()
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + h
                    up = vae_loss_and_grads(model, x_cols, eps_cols, 0.37)[0]
                    flat[i] = orig - h
                    down = vae_loss_and_grads(model, x_cols, eps_cols, 0.37)[0]
                    flat[i] = orig
                    numeric = (up - down) / (2 * h)
                    a = grad_a.ravel()[i]
                    worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-6))
    elapsed = time.perf_counter() - t0
    report(3, "VAE gradient check", worst <= 1e-4 and elapsed < 10.0,
           f"worst rel {worst:.2e}, {elapsed:.2f} s")


def test_criterion_04_kl_monte_carlo():
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(5):
        mu = rng.uniform(-1, 1, size=2)
        logvar = rng.uniform(-1, 1, size=2)
        sigma = np.exp(0.5 * logvar)
        _, _, closed = cp.vae_loss(np.zeros(1), np.zeros(1), mu, logvar, 1.0)
        z = mu + sigma * rng.standard_normal((10**6, 2))
        log_q = -0.5 * (np.log(2 * np.pi * sigma**2) + (z - mu) ** 2 / sigma**2)
        log_p = -0.5 * (np.log(2 * np.pi) + z**2)
        mc = float(np.mean(np.sum(log_q - log_p, axis=1)))
        worst = max(worst, abs(closed - mc))
    report(4, "KL closed form vs Monte Carlo", worst <= 1e-2, f"worst abs dev {worst:.2e}")


def test_criterion_05_gpr_interpolation_and_gradients():
    # noiseless 5-point 1-D fixture
    points = np.array([[0.2], [0.4], [0.6], [0.8], [1.0]])
    y = points[:, 0].copy()
    opt = cp.GprOptConfig(restarts=4, max_iters=150, seed=106,
                          noise_range=(NOISE_FLOOR, NOISE_FLOOR))
    model = cp.gpr_fit(points, y, opt, bounds=(np.array([0.0]), np.array([1.0])))
    means, _ = cp.gpr_predict(model, points)
    interp_err = float(np.max(np.abs(means[:, 0] - y)))

    # log-ML vs explicit-inverse oracle and finite-difference gradients
    rng = np.random.default_rng(107)
    pts = rng.uniform(0.1, 1.0, size=(5, 2))
    targets = rng.normal(size=5)
    params = KernelParams(linear_weights=rng.uniform(0.2, 2.0, 2),
                          matern_variance=rng.uniform(0.5, 2.0),
                          matern_lengthscales=rng.uniform(0.3, 2.0, 2),
                          noise_variance=1e-3)

    def dense_value(p):
        gram = cp.kernel_matrix(p, pts, pts) + p.noise_variance * np.eye(5)
        inv = np.linalg.inv(gram)
        _, logdet = np.linalg.slogdet(gram)
        return float(-0.5 * targets @ inv @ targets - 0.5 * logdet
                     - 2.5 * math.log(2 * math.pi))

    lml = cp.log_marginal_likelihood(params, pts, targets)
    oracle_err = abs(lml - dense_value(params))

    _, grad = cp.log_ml_and_grad(params, pts, targets)
    theta = params_to_theta(params)
    h = 1e-6
    grad_err = 0.0
    for i in range(len(theta)):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h

        def from_theta(t):
            v = np.exp(t)
            return KernelParams(linear_weights=v[:2], matern_variance=v[2],
                                matern_lengthscales=v[3:5],
                                noise_variance=max(v[5], NOISE_FLOOR))

        numeric = (dense_value(from_theta(up)) - dense_value(from_theta(down))) / (2 * h)
        grad_err = max(grad_err, abs(grad[i] - numeric) / max(abs(grad[i]), abs(numeric), 1e-6))

    passed = interp_err <= 1e-6 and oracle_err <= 1e-8 and grad_err <= 1e-5
    report(5, "GPR interpolation / log-ML oracle / gradients", passed,
           f"interp {interp_err:.2e}, oracle {oracle_err:.2e}, grad {grad_err:.2e}")


def test_criterion_06_kernel_hand_value():
    params = KernelParams(linear_weights=np.ones(2), matern_variance=1.0,
                          matern_lengthscales=np.ones(2), noise_variance=1e-8)
    value = cp.kernel_eval(params, np.array([1.0, 1.0]), np.array([2.0, 2.0]))
    expected = 4.0 * (1.0 + math.sqrt(6.0)) * math.exp(-math.sqrt(6.0))
    report(6, "kernel hand value", abs(value - expected) <= 1e-5,
           f"value {value:.6f} vs {expected:.6f}")


def test_criterion_07_beta_trend(desk):
    rmse = {key: _recon_rmse(desk.bundles[key], desk.data, desk.split.test)
            for key in desk.bundles}
    pca_ok = rmse[(True, 1.0)] > rmse[(True, 1e-3)]
    raw_ok = rmse[(False, 1.0)] > rmse[(False, 1e-3)]
    detail = (f"pca {rmse[(True, 1e-3)]:.4f} -> {rmse[(True, 1.0)]:.4f}, "
              f"raw {rmse[(False, 1e-3)]:.4f} -> {rmse[(False, 1.0)]:.4f}, "
              f"trained in {desk.train_seconds / 60:.1f} min")
    report(7, "beta trend in test reconstruction RMSE", pca_ok and raw_ok, detail)


def test_criterion_08_latent_condition_correlation(desk):
    bundle = desk.bundles[(True, 1e-3)]
    train = desk.split.train
    mu = cp.encode_latents(bundle, desk.data.values[:, train])
    mach = np.array([desk.data.conditions[i].mach for i in train])
    alpha = np.array([desk.data.conditions[i].alpha for i in train])
    corr_m = max(abs(np.corrcoef(mu[i], mach)[0, 1]) for i in range(2))
    corr_a = max(abs(np.corrcoef(mu[i], alpha)[0, 1]) for i in range(2))
    report(8, "latent-condition correlation", corr_m >= 0.8 and corr_a >= 0.8,
           f"|corr M| {corr_m:.3f}, |corr alpha| {corr_a:.3f}")


def test_criterion_09_fine_tuning_benefit(desk):
    results = {}
    for beta in (1.0, 1e-3):
        pre = _surrogate_report(desk.bundles[(True, beta)], desk.data, desk.split.test).mae
        post = _surrogate_report(desk.fine_tuned[(True, beta)], desk.data, desk.split.test).mae
        results[beta] = (pre, post)
    high_ok = results[1.0][1] < results[1.0][0]
    low_ok = results[1e-3][1] <= 1.05 * results[1e-3][0]

    original = desk.bundles[(True, 1.0)]
    tuned = desk.fine_tuned[(True, 1.0)]
    frozen = tuned.vae.encoder is original.vae.encoder
    for (w0, b0), (w1, b1) in zip(original.vae.encoder, tuned.vae.encoder):
        frozen &= np.array_equal(w0, w1) and np.array_equal(b0, b1)
    frozen &= np.array_equal(original.gpr.alpha, tuned.gpr.alpha)
    frozen &= np.array_equal(original.standardizer.mean, tuned.standardizer.mean)
    frozen &= np.array_equal(original.pca_basis.components, tuned.pca_basis.components)

    detail = (f"beta=1 MAE {results[1.0][0]:.4f} -> {results[1.0][1]:.4f}; "
              f"beta=1e-3 {results[1e-3][0]:.4f} -> {results[1e-3][1]:.4f}; frozen={frozen}")
    report(9, "fine-tuning benefit", high_ok and low_ok and frozen, detail)


def test_criterion_10_latent_ranking_self_consistency(desk):
    from cpsurrogate.surrogate import representation
    from cpsurrogate.vae import decode, encode, rank_latents
    all_ok = True
    for key, bundle in desk.bundles.items():
        rep = representation(bundle, desk.data.values)
        order = rank_latents(bundle.vae, rep)
        mu, _ = encode(bundle.vae, rep)
        errors = []
        for j in order:
            knocked = mu.copy()
            knocked[j, :] = 0.0
            errors.append(float(np.sqrt(np.mean((rep - decode(bundle.vae, knocked)) ** 2))))
        all_ok &= all(a >= b - 1e-15 for a, b in zip(errors, errors[1:]))
    report(10, "latent ranking self-consistency", all_ok, f"{len(desk.bundles)} models")


def test_criterion_11_pipeline_identity(desk):
    bundle = desk.bundles[(True, 1e-3)]
    fields = desk.data.values[:, desk.split.test[:20]]
    mu = cp.encode_latents(bundle, fields)
    via_latents = cp.fields_from_latents(bundle, mu)
    recon = cp.reconstruct_fields(bundle, fields)
    report(11, "pipeline identity (true mu bypass)", np.array_equal(via_latents, recon))


def test_criterion_12_persistence(tmp_path, small_data, small_bundle):
    conditions = [small_data.conditions[i] for i in range(8)]
    before = cp.predict_cp(small_bundle, conditions).values
    cp.save_bundle(small_bundle, tmp_path / "bundle")
    loaded = cp.load_bundle(tmp_path / "bundle")
    after = cp.predict_cp(loaded, conditions).values
    bit_exact = np.array_equal(before, after)

    (tmp_path / "bundle" / "manifest.json").write_text("{definitely not json")
    data_path = tmp_path / "d.sfm"
    cp.save_matrix(small_data, data_path)
    exit_code = main(["evaluate", "--bundle", str(tmp_path / "bundle"), "--data",
                      str(data_path), "--out", str(tmp_path / "e"), "--quiet"])
    report(12, "persistence round trip and corruption rejection",
           bit_exact and exit_code == 5, f"bit_exact={bit_exact}, exit={exit_code}")


def test_criterion_13_determinism(tmp_path):
    config = dict(DEFAULT_RUN_CONFIG)  # gen-data at the default desk size
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "dataset": {"n_chord": 8, "n_span": 5, "n_conditions": 20, "seed": 3},
        "split": {"train_fraction": 0.7, "seed": 2},
        "pipeline": {"encoder_hidden": [16, 8], "decoder_hidden": [8, 16],
                     "train": {"epochs": 60, "seed": 4},
                     "gpr": {"restarts": 2, "max_iters": 30, "seed": 5}},
        "sweep": {"betas": [0.001, 1.0], "latent_dims": [2], "use_pca": [True]},
    }))

    def digest(path):
        return hashlib.sha256(path.read_bytes()).hexdigest()

    gen_hashes = []
    for name in ("a.sfm", "b.sfm"):
        assert main(["gen-data", "--out", str(tmp_path / name), "--quiet"]) == 0
        gen_hashes.append(digest(tmp_path / name))
    data_path = tmp_path / "small.sfm"
    assert main(["gen-data", "--config", str(config_path), "--out", str(data_path),
                 "--quiet"]) == 0

    train_hashes = []
    for name in ("t1", "t2"):
        assert main(["train", "--config", str(config_path), "--data", str(data_path),
                     "--out", str(tmp_path / name), "--quiet"]) == 0
        train_hashes.append(digest(tmp_path / name / "metrics.csv"))

    sweep_hashes = []
    for name in ("s1", "s2"):
        assert main(["sweep", "--config", str(config_path), "--data", str(data_path),
                     "--out", str(tmp_path / name), "--quiet"]) == 0
        sweep_hashes.append(digest(tmp_path / name / "sweep.csv"))

    passed = (gen_hashes[0] == gen_hashes[1] and train_hashes[0] == train_hashes[1]
              and sweep_hashes[0] == sweep_hashes[1])
    report(13, "determinism of gen-data / train / sweep", passed)


# ---------------------------------------------------------------------------
# supplementary calibration examples tied to the default run
# ---------------------------------------------------------------------------

def test_supplementary_surrogate_close_to_autoencoder(desk):
    # surrogate RMSE within 1.5x of the autoencoder's own reconstruction RMSE
    # at beta <= 1e-3
    bundle = desk.bundles[(True, 1e-3)]
    recon = _recon_rmse(bundle, desk.data, desk.split.test)
    surr = _surrogate_report(bundle, desk.data, desk.split.test).rmse
    assert surr <= 1.5 * recon, f"surrogate {surr:.4f} vs recon {recon:.4f}"


def test_supplementary_network_size_ratio(desk):
    # PCA pre-processing shrinks the network: desk-scale analogue of the
    # Table-1 parameter-count gap
    pca_params = desk.bundles[(True, 1e-3)].vae.parameter_count()
    raw_params = desk.bundles[(False, 1e-3)].vae.parameter_count()
    assert pca_params * 2 <= raw_params, f"{pca_params} vs {raw_params}"


def test_supplementary_error_triple_reported(desk):
    # autoencoder, surrogate, and fine-tuned surrogate errors are all finite
    # and reported together; no ordering among them is asserted
    bundle = desk.bundles[(True, 1.0)]
    tuned = desk.fine_tuned[(True, 1.0)]
    recon = _recon_rmse(bundle, desk.data, desk.split.test)
    surr = _surrogate_report(bundle, desk.data, desk.split.test).rmse
    tuned_rmse = _surrogate_report(tuned, desk.data, desk.split.test).rmse
    triple = (recon, surr, tuned_rmse)
    print(f"[error triple beta=1] autoencoder {recon:.4f}, surrogate {surr:.4f}, "
          f"fine-tuned {tuned_rmse:.4f}", flush=True)
    assert all(np.isfinite(v) for v in triple)


def test_supplementary_mlp_benchmark_same_order(desk):
    cfg = load_run_config(None)
    bundle = desk.bundles[(True, 1e-3)]
    arch = cp.MlpArchitecture(2, bundle.config.decoder_hidden, bundle.rep_dim)
    from cpsurrogate.config import train_config_from_section
    bench = cp.train_mlp_benchmark(desk.data, desk.split, arch,
                                   train_config_from_section(cfg["pipeline"]["train"]),
                                   use_pca=True)
    conditions = [desk.data.conditions[i] for i in desk.split.test]
    pred = cp.predict_benchmark(bench, conditions)
    bench_mae = cp.mae(pred, desk.data.values[:, desk.split.test])
    surr_mae = _surrogate_report(bundle, desk.data, desk.split.test).mae
    ratio = max(bench_mae / surr_mae, surr_mae / bench_mae)
    assert ratio <= 10.0, f"benchmark MAE {bench_mae:.4f} vs surrogate {surr_mae:.4f}"
