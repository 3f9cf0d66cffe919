"""Pressure-field surrogate modeling: PCA pre-processing, beta-VAE dimensionality
reduction, Gaussian-process latent regression, and decoder fine-tuning."""

from .dataset import (DEFAULT_ALPHA_RANGE, DEFAULT_MACH_RANGE, FieldMatrix, FlightCondition,
                      GridSpec, MatrixFormatError, SplitIndices, Standardizer,
                      export_matrix_csv, fit_standardizer, generate_synthetic,
                      import_matrix_csv, load_matrix, read_array, sample_envelope,
                      save_matrix, split_dataset, write_array)
from .gpr import (GprFitError, GprModel, GprOptConfig, IndefiniteKernelError, KernelParams,
                  gpr_fit, gpr_predict, kernel_eval, kernel_matrix, log_marginal_likelihood,
                  log_ml_and_grad)
from .metrics import MetricsReport, compute_report, mae, nrmse_latent, r2, rmse
from .pca import PcaBasis, pca_fit, pca_inverse, pca_transform
from .surrogate import (BundleFormatError, CpPrediction, LatentSummary, MlpBenchmark,
                        PipelineConfig, PipelineStageError, SurrogateBundle, check_dimensions,
                        convex_hull_indices, encode_latents, export_latent_summary,
                        fields_from_latents, fine_tune_decoder, load_bundle, predict_benchmark,
                        predict_cp, reconstruct_fields, representation, save_bundle,
                        train_mlp_benchmark, train_surrogate)
from .vae import (MlpArchitecture, TrainConfig, TrainHistory, TrainingDiverged, VaeModel,
                  decode, encode, init_vae, rank_latents, reparameterize, train_vae, vae_loss,
                  vae_loss_and_grads)

__version__ = "0.1.0"
