"""Pipeline assembly: optional PCA -> standardize -> beta-VAE -> GPR, plus decoder
fine-tuning, a direct-MLP benchmark, latent-space exports, and bundle persistence."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import (DEFAULT_ALPHA_RANGE, DEFAULT_MACH_RANGE, FieldMatrix, FlightCondition,
                      GridSpec, SplitIndices, Standardizer, fit_standardizer, read_array,
                      write_array)
from .gpr import GprModel, GprOptConfig, KernelParams, gpr_fit, gpr_predict
from .nn import clone_params, train_mlp_mse
from .pca import PcaBasis, pca_fit, pca_inverse, pca_transform
from .vae import (MlpArchitecture, TrainConfig, TrainingDiverged, VaeModel, decode, encode,
                  init_vae, rank_latents, train_vae)

BUNDLE_FORMAT = "cpsurrogate-bundle"
BUNDLE_VERSION = 1


class BundleFormatError(Exception):
    """Bundle directory is missing, corrupt, or has an unsupported version."""


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; the stage name prefixes the message."""

    def __init__(self, stage: str, original: Exception):
        super().__init__(f"{stage} stage failed: {original}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for one surrogate: representation choice, VAE shape, training, GPR."""

    use_pca: bool = True
    latent_dim: int = 2
    beta: float = 1e-3
    encoder_hidden: tuple[int, ...] = (256, 128, 64, 32, 16)
    decoder_hidden: tuple[int, ...] = (16, 32, 64, 128, 256)
    train: TrainConfig = TrainConfig()
    gpr: GprOptConfig = GprOptConfig()
    mach_range: tuple[float, float] = DEFAULT_MACH_RANGE
    alpha_range: tuple[float, float] = DEFAULT_ALPHA_RANGE

    def __post_init__(self):
        object.__setattr__(self, "encoder_hidden", tuple(int(h) for h in self.encoder_hidden))
        object.__setattr__(self, "decoder_hidden", tuple(int(h) for h in self.decoder_hidden))
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.beta < 0 or not np.isfinite(self.beta):
            raise ValueError("beta must be finite and >= 0")


@dataclass
class SurrogateBundle:
    """Trained pipeline components; immutable after training by convention."""

    config: PipelineConfig
    grid: GridSpec
    standardizer: Standardizer
    pca_basis: PcaBasis | None
    vae: VaeModel
    gpr: GprModel
    fine_tuned_decoder: list[tuple[np.ndarray, np.ndarray]] | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def rep_dim(self) -> int:
        return self.vae.input_dim

    @property
    def latent_dim(self) -> int:
        return self.vae.d


@dataclass
class CpPrediction:
    """Predicted fields (q x m, one column per condition) with envelope flags."""

    values: np.ndarray
    outside_envelope: np.ndarray


@dataclass
class MlpBenchmark:
    """Direct (Mach, alpha) -> representation regressor sharing the surrogate's tail."""

    arch: MlpArchitecture
    params: list[tuple[np.ndarray, np.ndarray]]
    standardizer: Standardizer
    pca_basis: PcaBasis | None
    grid: GridSpec
    norm_lo: np.ndarray
    norm_hi: np.ndarray


@dataclass
class LatentSummary:
    """Per-sample latent means (columns ordered by ranking) plus hull membership."""

    rows: list[dict]
    ranking: list[int]
    hull_indices: list[int]


def check_dimensions(bundle: SurrogateBundle) -> None:
    """Verify the 2 -> d -> network -> q dimension chain before any prediction."""
    d = bundle.vae.d
    if bundle.gpr.input_dim != 2:
        raise ValueError(f"GPR input dimension {bundle.gpr.input_dim} != 2")
    if bundle.gpr.output_dim != d:
        raise ValueError(f"GPR output dimension {bundle.gpr.output_dim} != latent dim {d}")
    if bundle.vae.arch_dec.input_dim != d or bundle.vae.arch_enc.output_dim != 2 * d:
        raise ValueError("VAE architecture inconsistent with latent dimension")
    rep_dim = bundle.rep_dim
    if bundle.vae.arch_dec.output_dim != rep_dim:
        raise ValueError("decoder output width must equal the representation dimension")
    if len(bundle.standardizer.mean) != bundle.grid.q:
        raise ValueError("standardizer feature count does not match the grid")
    if bundle.pca_basis is not None:
        if bundle.pca_basis.rank != rep_dim:
            raise ValueError(f"PCA rank {bundle.pca_basis.rank} != representation dim {rep_dim}")
        if len(bundle.pca_basis.mean) != bundle.grid.q:
            raise ValueError("PCA basis feature count does not match the grid")
    elif rep_dim != bundle.grid.q:
        raise ValueError(f"representation dim {rep_dim} != grid q {bundle.grid.q}")
    if bundle.fine_tuned_decoder is not None:
        for (w0, b0), (w1, b1) in zip(bundle.vae.decoder, bundle.fine_tuned_decoder, strict=True):
            if w0.shape != w1.shape or b0.shape != b1.shape:
                raise ValueError("fine-tuned decoder architecture differs from the original")


def _conditions_array(conditions) -> np.ndarray:
    return np.array([[c.mach, c.alpha] for c in conditions], dtype=np.float64)


def _fields_from_representation(standardizer: Standardizer, basis: PcaBasis | None,
                                rep: np.ndarray) -> np.ndarray:
    std_fields = pca_inverse(basis, rep) if basis is not None else rep
    return standardizer.invert(std_fields)


def representation(bundle: SurrogateBundle, fields: np.ndarray) -> np.ndarray:
    """Network representation of raw Cp columns: standardize, then project onto the
    PCA basis when enabled (principal coordinates keep their energy ordering)."""
    std_fields = bundle.standardizer.apply(fields)
    return pca_transform(bundle.pca_basis, std_fields) if bundle.pca_basis is not None else std_fields


def encode_latents(bundle: SurrogateBundle, fields: np.ndarray) -> np.ndarray:
    """Encoder means (d x k) for raw Cp columns."""
    mu, _ = encode(bundle.vae, representation(bundle, fields))
    return mu


def fields_from_latents(bundle: SurrogateBundle, latents: np.ndarray,
                        use_fine_tuned: bool = False) -> np.ndarray:
    """Decode latent columns (d x k) all the way back to Cp columns (q x k)."""
    check_dimensions(bundle)
    decoder = bundle.vae.decoder
    if use_fine_tuned and bundle.fine_tuned_decoder is not None:
        decoder = bundle.fine_tuned_decoder
    rep = decode(bundle.vae, latents, decoder=decoder)
    return _fields_from_representation(bundle.standardizer, bundle.pca_basis, rep)


def reconstruct_fields(bundle: SurrogateBundle, fields: np.ndarray,
                       use_fine_tuned: bool = False) -> np.ndarray:
    """Autoencoder reconstruction (encode to mu, decode) of raw Cp columns."""
    return fields_from_latents(bundle, encode_latents(bundle, fields), use_fine_tuned)


def train_surrogate(data: FieldMatrix, split: SplitIndices, config: PipelineConfig) -> SurrogateBundle:
    """Fit the full pipeline on the training columns of `data`.

    The standardizer (per grid point) and the optional PCA basis are fitted on
    training columns only; the VAE trains on the network representation
    (principal coordinates of the standardized fields, or the standardized
    fields themselves); the GPR maps normalized flight conditions to the
    frozen encoder means.
    """
    if split.n != data.n_samples:
        raise ValueError(f"split covers {split.n} samples, data has {data.n_samples}")
    train_cols = split.train
    if len(train_cols) < 2:
        raise ValueError("need at least 2 training samples")

    try:
        standardizer = fit_standardizer(data.values, train_cols)
        std_fields = standardizer.apply(data.values)
    except Exception as exc:
        raise PipelineStageError("standardize", exc) from exc

    try:
        basis = pca_fit(std_fields[:, train_cols]) if config.use_pca else None
        rep_all = pca_transform(basis, std_fields) if basis is not None else std_fields
    except Exception as exc:
        raise PipelineStageError("pca", exc) from exc

    rep_dim = rep_all.shape[0]
    d = config.latent_dim
    try:
        arch_enc = MlpArchitecture(rep_dim, config.encoder_hidden, 2 * d)
        arch_dec = MlpArchitecture(d, config.decoder_hidden, rep_dim)
        model = init_vae(arch_enc, arch_dec, d=d, beta=config.beta, seed=config.train.seed)
        model, history = train_vae(model, rep_all[:, train_cols], config.train)
    except TrainingDiverged as exc:
        exc.stage = "vae"
        raise
    except Exception as exc:
        raise PipelineStageError("vae", exc) from exc

    try:
        mu_train, _ = encode(model, rep_all[:, train_cols])
        points = _conditions_array([data.conditions[i] for i in train_cols])
        bounds = (np.array([config.mach_range[0], config.alpha_range[0]]),
                  np.array([config.mach_range[1], config.alpha_range[1]]))
        gpr = gpr_fit(points, mu_train.T, config.gpr, bounds=bounds)
    except Exception as exc:
        raise PipelineStageError("gpr", exc) from exc

    provenance = {
        "train_index": [int(i) for i in train_cols],
        "n_samples": int(data.n_samples),
        "history_digest": hashlib.sha256(
            np.concatenate([history.total, history.rec, history.kl]).tobytes()).hexdigest(),
        "final_loss": {"total": float(history.total[-1]), "rec": float(history.rec[-1]),
                       "kl": float(history.kl[-1])},
    }
    bundle = SurrogateBundle(config=config, grid=data.grid, standardizer=standardizer,
                             pca_basis=basis, vae=model, gpr=gpr, provenance=provenance)
    bundle.provenance["history"] = history
    check_dimensions(bundle)
    return bundle


def predict_cp(bundle: SurrogateBundle, conditions: list[FlightCondition]) -> CpPrediction:
    """Predict Cp fields for flight conditions via GPR means and the decoder.

    Out-of-envelope conditions are flagged, not rejected.
    """
    check_dimensions(bundle)
    if not conditions:
        raise ValueError("no conditions given")
    points = _conditions_array(conditions)
    means, _ = gpr_predict(bundle.gpr, points)
    fields = fields_from_latents(bundle, means.T, use_fine_tuned=True)
    outside = np.array([not c.in_envelope(bundle.config.mach_range, bundle.config.alpha_range)
                        for c in conditions])
    return CpPrediction(values=fields, outside_envelope=outside)


def fine_tune_decoder(bundle: SurrogateBundle, data: FieldMatrix, split: SplitIndices,
                      tune_config: TrainConfig | None = None) -> SurrogateBundle:
    """Retrain a copy of the decoder on GPR-predicted latents, reconstruction loss only.

    Inputs are the GPR means at training conditions; targets are the existing
    standardized training representations (nothing is refitted). The returned
    bundle shares every other component with the original.
    """
    check_dimensions(bundle)
    if split.n != data.n_samples:
        raise ValueError(f"split covers {split.n} samples, data has {data.n_samples}")
    if tune_config is None:
        tune_config = TrainConfig(learning_rate=1e-4, epochs=500, seed=bundle.config.train.seed)
    rep = representation(bundle, data.values)
    targets = rep[:, split.train].T
    points = _conditions_array([data.conditions[i] for i in split.train])
    mu_hat, _ = gpr_predict(bundle.gpr, points)
    try:
        tuned, history = train_mlp_mse(clone_params(bundle.vae.decoder), mu_hat, targets, tune_config)
    except TrainingDiverged as exc:
        exc.stage = "fine-tune"
        raise
    provenance = dict(bundle.provenance)
    provenance["finetune"] = {"epochs": tune_config.epochs, "learning_rate": tune_config.learning_rate,
                              "final_loss": history[-1]}
    return replace(bundle, fine_tuned_decoder=tuned, provenance=provenance)


def train_mlp_benchmark(data: FieldMatrix, split: SplitIndices, arch: MlpArchitecture,
                        config: TrainConfig, use_pca: bool = False,
                        mach_range=DEFAULT_MACH_RANGE, alpha_range=DEFAULT_ALPHA_RANGE) -> MlpBenchmark:
    """Train a direct MLP regressor (Mach, alpha) -> standardized representation.

    The architecture is expected to mimic a decoder: input width 2, output
    width equal to the representation dimension.
    """
    if arch.input_dim != 2:
        raise ValueError("benchmark architecture must take the 2-dimensional flight condition")
    if split.n != data.n_samples:
        raise ValueError("split does not match data")
    standardizer = fit_standardizer(data.values, split.train)
    std_fields = standardizer.apply(data.values)
    basis = pca_fit(std_fields[:, split.train]) if use_pca else None
    rep_all = pca_transform(basis, std_fields) if basis is not None else std_fields
    if arch.output_dim != rep_all.shape[0]:
        raise ValueError(f"architecture output {arch.output_dim} != representation dim {rep_all.shape[0]}")
    lo = np.array([mach_range[0], alpha_range[0]])
    hi = np.array([mach_range[1], alpha_range[1]])
    points = (_conditions_array([data.conditions[i] for i in split.train]) - lo) / (hi - lo)
    from .nn import init_mlp  # local import to keep module surface tidy
    params = init_mlp(arch, np.random.default_rng(config.seed))
    params, _ = train_mlp_mse(params, points, rep_all[:, split.train].T, config)
    return MlpBenchmark(arch=arch, params=params, standardizer=standardizer, pca_basis=basis,
                        grid=data.grid, norm_lo=lo, norm_hi=hi)


def predict_benchmark(bench: MlpBenchmark, conditions: list[FlightCondition]) -> np.ndarray:
    """Benchmark Cp prediction; shares the inverse-PCA / de-standardize tail."""
    from .nn import mlp_forward
    points = (_conditions_array(conditions) - bench.norm_lo) / (bench.norm_hi - bench.norm_lo)
    rep = mlp_forward(bench.params, points).T
    return _fields_from_representation(bench.standardizer, bench.pca_basis, rep)


def convex_hull_indices(points: np.ndarray) -> list[int]:
    """Indices of the strictly convex hull (monotone chain); collinear points excluded."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n == 0:
        return []
    order = np.lexsort((points[:, 1], points[:, 0]))
    # drop exact duplicates, keeping the first in sort order
    deduped = []
    for idx in order:
        if not deduped or not np.array_equal(points[idx], points[deduped[-1]]):
            deduped.append(int(idx))
    if len(deduped) == 1:
        return deduped

    def cross(o, a, b):
        return ((points[a, 0] - points[o, 0]) * (points[b, 1] - points[o, 1])
                - (points[a, 1] - points[o, 1]) * (points[b, 0] - points[o, 0]))

    def half(seq):
        chain = []
        for idx in seq:
            while len(chain) >= 2 and cross(chain[-2], chain[-1], idx) <= 0:
                chain.pop()
            chain.append(idx)
        return chain

    lower = half(deduped)
    upper = half(deduped[::-1])
    return lower[:-1] + upper[:-1]


def export_latent_summary(bundle: SurrogateBundle, data: FieldMatrix,
                          split: SplitIndices) -> LatentSummary:
    """Latent means per sample with conditions, split labels, and hull membership.

    Latent columns are reported in ranking order (most informative first). The
    convex hull is computed over the 2-D latent cloud and skipped for d != 2.
    """
    check_dimensions(bundle)
    if split.n != data.n_samples:
        raise ValueError("split does not match data")
    rep = representation(bundle, data.values)
    mu, _ = encode(bundle.vae, rep)
    ranking = rank_latents(bundle.vae, rep)
    labels = np.array(["train"] * data.n_samples, dtype=object)
    labels[split.test] = "test"
    hull: list[int] = []
    if bundle.latent_dim == 2:
        hull = convex_hull_indices(mu.T)
    hull_set = set(hull)
    rows = []
    for i, cond in enumerate(data.conditions):
        row = {"mach": cond.mach, "alpha": cond.alpha}
        for pos, j in enumerate(ranking):
            row[f"mu_{pos + 1}"] = float(mu[j, i])
        row["split"] = str(labels[i])
        row["is_hull_vertex"] = i in hull_set
        rows.append(row)
    return LatentSummary(rows=rows, ranking=ranking, hull_indices=hull)


# ---------------------------------------------------------------------------
# bundle persistence
# ---------------------------------------------------------------------------

def train_config_to_dict(config: TrainConfig) -> dict:
    return {"learning_rate": config.learning_rate, "adam_beta1": config.adam_beta1,
            "adam_beta2": config.adam_beta2, "adam_eps": config.adam_eps,
            "epochs": config.epochs, "batch_size": config.batch_size, "seed": config.seed}


def train_config_from_dict(d: dict) -> TrainConfig:
    return TrainConfig(**d)


def gpr_config_to_dict(config: GprOptConfig) -> dict:
    return {"restarts": config.restarts, "max_iters": config.max_iters, "seed": config.seed,
            "amplitude_range": list(config.amplitude_range), "noise_range": list(config.noise_range)}


def gpr_config_from_dict(d: dict) -> GprOptConfig:
    d = dict(d)
    d["amplitude_range"] = tuple(d["amplitude_range"])
    d["noise_range"] = tuple(d["noise_range"])
    return GprOptConfig(**d)


def pipeline_config_to_dict(config: PipelineConfig) -> dict:
    return {"use_pca": config.use_pca, "latent_dim": config.latent_dim, "beta": config.beta,
            "encoder_hidden": list(config.encoder_hidden), "decoder_hidden": list(config.decoder_hidden),
            "train": train_config_to_dict(config.train), "gpr": gpr_config_to_dict(config.gpr),
            "mach_range": list(config.mach_range), "alpha_range": list(config.alpha_range)}


def pipeline_config_from_dict(d: dict) -> PipelineConfig:
    return PipelineConfig(use_pca=d["use_pca"], latent_dim=d["latent_dim"], beta=d["beta"],
                          encoder_hidden=tuple(d["encoder_hidden"]),
                          decoder_hidden=tuple(d["decoder_hidden"]),
                          train=train_config_from_dict(d["train"]),
                          gpr=gpr_config_from_dict(d["gpr"]),
                          mach_range=tuple(d["mach_range"]), alpha_range=tuple(d["alpha_range"]))


def _layer_files(prefix: str, params) -> dict[str, np.ndarray]:
    out = {}
    for i, (w, b) in enumerate(params):
        out[f"{prefix}_w{i}.sfm"] = w
        out[f"{prefix}_b{i}.sfm"] = b
    return out


def _load_layers(directory: Path, prefix: str, n_layers: int):
    params = []
    for i in range(n_layers):
        w = read_array(directory / f"{prefix}_w{i}.sfm")
        b = read_array(directory / f"{prefix}_b{i}.sfm").ravel()
        params.append((w, b))
    return params


def _kernel_params_to_dict(p: KernelParams) -> dict:
    return {"linear_weights": [float(v) for v in p.linear_weights],
            "matern_variance": float(p.matern_variance),
            "matern_lengthscales": [float(v) for v in p.matern_lengthscales],
            "noise_variance": float(p.noise_variance)}


def save_bundle(bundle: SurrogateBundle, directory) -> None:
    """Persist every component bit-exactly: matrix files plus a JSON manifest."""
    check_dimensions(bundle)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    arrays: dict[str, np.ndarray] = {
        "std_mean.sfm": bundle.standardizer.mean,
        "std_scale.sfm": bundle.standardizer.scale,
        "gpr_inputs.sfm": bundle.gpr.inputs,
        "gpr_targets.sfm": bundle.gpr.targets,
        "gpr_alpha.sfm": bundle.gpr.alpha,
    }
    for k, chol in enumerate(bundle.gpr.chols):
        arrays[f"gpr_chol{k}.sfm"] = chol
    if bundle.pca_basis is not None:
        arrays["pca_mean.sfm"] = bundle.pca_basis.mean
        arrays["pca_components.sfm"] = bundle.pca_basis.components
        arrays["pca_variances.sfm"] = bundle.pca_basis.variances
    arrays.update(_layer_files("enc", bundle.vae.encoder))
    arrays.update(_layer_files("dec", bundle.vae.decoder))
    if bundle.fine_tuned_decoder is not None:
        arrays.update(_layer_files("ftdec", bundle.fine_tuned_decoder))

    digests = {}
    for name, arr in arrays.items():
        path = directory / name
        write_array(path, arr)
        digests[name] = hashlib.sha256(path.read_bytes()).hexdigest()

    provenance = {k: v for k, v in bundle.provenance.items() if k != "history"}
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "config": pipeline_config_to_dict(bundle.config),
        "grid": {"n_chord": bundle.grid.n_chord, "n_span": bundle.grid.n_span},
        "latent_dim": bundle.vae.d,
        "rep_dim": bundle.rep_dim,
        "pca": None if bundle.pca_basis is None else {
            "rank": bundle.pca_basis.rank,
            "sign_convention": "largest-magnitude-entry-positive",
        },
        "encoder_layers": len(bundle.vae.encoder),
        "decoder_layers": len(bundle.vae.decoder),
        "has_fine_tuned_decoder": bundle.fine_tuned_decoder is not None,
        "gpr": {
            "normalization": {"lo": [float(v) for v in bundle.gpr.norm_lo],
                              "hi": [float(v) for v in bundle.gpr.norm_hi]},
            "outputs": [_kernel_params_to_dict(p) for p in bundle.gpr.params],
            "jitters": [float(j) for j in bundle.gpr.jitters],
        },
        "files": digests,
        "provenance": provenance,
    }
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def load_bundle(directory) -> SurrogateBundle:
    """Load a bundle directory, verifying version and per-file digests."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise BundleFormatError(f"{directory}: manifest.json not found")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BundleFormatError(f"{manifest_path}: not valid JSON ({exc})") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != BUNDLE_FORMAT:
        raise BundleFormatError(f"{manifest_path}: not a {BUNDLE_FORMAT} manifest")
    if manifest.get("version") != BUNDLE_VERSION:
        raise BundleFormatError(
            f"{manifest_path}: unsupported version {manifest.get('version')!r}, expected {BUNDLE_VERSION}")

    try:
        for name, digest in manifest["files"].items():
            path = directory / name
            if not path.is_file():
                raise BundleFormatError(f"{directory}: missing component file {name}")
            if hashlib.sha256(path.read_bytes()).hexdigest() != digest:
                raise BundleFormatError(f"{directory}: digest mismatch for {name}")

        config = pipeline_config_from_dict(manifest["config"])
        grid = GridSpec(n_chord=manifest["grid"]["n_chord"], n_span=manifest["grid"]["n_span"])
        standardizer = Standardizer(mean=read_array(directory / "std_mean.sfm").ravel(),
                                    scale=read_array(directory / "std_scale.sfm").ravel())
        basis = None
        if config.use_pca:
            basis = PcaBasis(mean=read_array(directory / "pca_mean.sfm").ravel(),
                             components=read_array(directory / "pca_components.sfm"),
                             variances=read_array(directory / "pca_variances.sfm").ravel())
        d = int(manifest["latent_dim"])
        rep_dim = int(manifest["rep_dim"])
        encoder = _load_layers(directory, "enc", manifest["encoder_layers"])
        decoder = _load_layers(directory, "dec", manifest["decoder_layers"])
        arch_enc = MlpArchitecture(rep_dim, config.encoder_hidden, 2 * d)
        arch_dec = MlpArchitecture(d, config.decoder_hidden, rep_dim)
        model = VaeModel(arch_enc=arch_enc, arch_dec=arch_dec, encoder=encoder, decoder=decoder,
                         d=d, beta=config.beta)
        fine_tuned = None
        if manifest["has_fine_tuned_decoder"]:
            fine_tuned = _load_layers(directory, "ftdec", manifest["decoder_layers"])

        gmeta = manifest["gpr"]
        params = [KernelParams(linear_weights=np.array(p["linear_weights"]),
                               matern_variance=p["matern_variance"],
                               matern_lengthscales=np.array(p["matern_lengthscales"]),
                               noise_variance=p["noise_variance"]) for p in gmeta["outputs"]]
        targets = read_array(directory / "gpr_targets.sfm")
        chols = [read_array(directory / f"gpr_chol{k}.sfm") for k in range(len(params))]
        gpr = GprModel(inputs=read_array(directory / "gpr_inputs.sfm"), targets=targets,
                       params=params, chols=chols, alpha=read_array(directory / "gpr_alpha.sfm"),
                       norm_lo=np.array(gmeta["normalization"]["lo"]),
                       norm_hi=np.array(gmeta["normalization"]["hi"]),
                       jitters=list(gmeta["jitters"]))
    except BundleFormatError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise BundleFormatError(f"{directory}: corrupt bundle ({exc})") from exc

    bundle = SurrogateBundle(config=config, grid=grid, standardizer=standardizer, pca_basis=basis,
                             vae=model, gpr=gpr, fine_tuned_decoder=fine_tuned,
                             provenance=manifest.get("provenance", {}))
    check_dimensions(bundle)
    return bundle
