"""Command-line interface: data generation, training, sweeps, evaluation, fine-tuning,
prediction, and latent-space export. Logs go to stderr, data to files.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 training failure,
5 bundle error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import multiprocessing
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_run_config, override_seeds, pipeline_config_from_run, \
    train_config_from_section
from .dataset import (FlightCondition, GridSpec, MatrixFormatError, SplitIndices,
                      generate_synthetic, load_matrix, sample_envelope, save_matrix,
                      split_dataset)
from .gpr import GprFitError, gpr_predict
from .metrics import compute_report, nrmse_latent
from .nn import TrainingDiverged
from .surrogate import (BundleFormatError, PipelineStageError, SurrogateBundle, encode_latents,
                        export_latent_summary, fine_tune_decoder, load_bundle, predict_cp,
                        reconstruct_fields, save_bundle, train_surrogate)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_TRAIN = 4
EXIT_BUNDLE = 5

SWEEP_SCHEMA = "sweep-v1"
SWEEP_COLUMNS = ["schema", "cell", "use_pca", "beta", "d", "status", "recon_rmse",
                 "recon_rmse_mean", "surrogate_mae", "surrogate_rmse", "surrogate_r2",
                 "nrmse_mean", "nrmse_median", "nrmse_p95", "message"]
METRIC_COLUMNS = ["model", "beta", "d", "split", "mae", "rmse", "r2"]
SLICE_ETAS = (0.1, 0.5, 0.9)


def _log(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def _model_label(use_pca: bool) -> str:
    return "pca+beta-vae+gpr" if use_pca else "beta-vae+gpr"


def _split_for_bundle(bundle: SurrogateBundle, n: int) -> SplitIndices | None:
    """Recover the training split recorded in the bundle, if it matches the data."""
    train_index = bundle.provenance.get("train_index")
    if train_index is None or bundle.provenance.get("n_samples") != n:
        return None
    train = np.asarray(train_index, dtype=np.intp)
    mask = np.ones(n, dtype=bool)
    mask[train] = False
    return SplitIndices(train=train, test=np.flatnonzero(mask))


def _metric_rows(bundle: SurrogateBundle, data, split: SplitIndices | None) -> list[dict]:
    label = _model_label(bundle.config.use_pca)
    groups = ([("train", split.train), ("test", split.test)] if split is not None
              else [("all", np.arange(data.n_samples))])
    rows = []
    for name, idx in groups:
        if len(idx) == 0:
            continue
        pred = predict_cp(bundle, [data.conditions[i] for i in idx]).values
        report = compute_report(pred, data.values[:, idx])
        rows.append({"model": label, "beta": bundle.config.beta, "d": bundle.latent_dim,
                     "split": name, "mae": report.mae, "rmse": report.rmse, "r2": report.r2})
    return rows


def _per_sample_rows(bundle: SurrogateBundle, data, split: SplitIndices | None) -> list[dict]:
    mu_all = encode_latents(bundle, data.values)
    mu_hat, _ = gpr_predict(bundle.gpr, np.array([[c.mach, c.alpha] for c in data.conditions]))
    mu_hat = mu_hat.T
    if split is not None:
        mu_bar = mu_all[:, split.train].mean(axis=1)
        labels = np.array(["train"] * data.n_samples, dtype=object)
        labels[split.test] = "test"
    else:
        mu_bar = mu_all.mean(axis=1)
        labels = np.array(["all"] * data.n_samples, dtype=object)
    pred = predict_cp(bundle, data.conditions).values
    rows = []
    for i, cond in enumerate(data.conditions):
        diff = pred[:, i] - data.values[:, i]
        try:
            nrmse = nrmse_latent(mu_all[:, i], mu_hat[:, i], mu_bar)
        except ValueError:
            nrmse = float("nan")
        rows.append({"index": i, "mach": cond.mach, "alpha": cond.alpha, "split": str(labels[i]),
                     "mae": float(np.mean(np.abs(diff))), "rmse": float(np.sqrt(np.mean(diff**2))),
                     "nrmse_latent": nrmse})
    return rows


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _load_config(args) -> dict:
    cfg = load_run_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = override_seeds(cfg, args.seed)
    return cfg


def cmd_gen_data(args) -> int:
    cfg = _load_config(args)
    ds = cfg["dataset"]
    grid = GridSpec(n_chord=ds["n_chord"], n_span=ds["n_span"])
    conditions = sample_envelope(ds["n_conditions"], tuple(ds["mach_range"]),
                                 tuple(ds["alpha_range"]), seed=ds["seed"], jitter=ds["jitter"])
    matrix = generate_synthetic(grid, conditions, noise_std=ds["noise_std"], seed=ds["seed"])
    save_matrix(matrix, args.out)
    _log(args, f"wrote {args.out}: q={matrix.q} (grid {grid.n_chord}x{grid.n_span}), "
               f"n={matrix.n_samples}, mach={ds['mach_range']}, alpha={ds['alpha_range']}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    data = load_matrix(args.data)
    split = split_dataset(data.n_samples, cfg["split"]["train_fraction"], cfg["split"]["seed"])
    pconf = pipeline_config_from_run(cfg)
    _log(args, f"training {_model_label(pconf.use_pca)} (beta={pconf.beta}, d={pconf.latent_dim}) "
               f"on {len(split.train)}/{len(split.test)} train/test samples")
    bundle = train_surrogate(data, split, pconf)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_bundle(bundle, out / "bundle")
    history = bundle.provenance["history"]
    _write_csv(out / "history.csv", ["epoch", "total", "rec", "kl"],
               [{"epoch": i, "total": t, "rec": r, "kl": k}
                for i, (t, r, k) in enumerate(zip(history.total, history.rec, history.kl))])
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, _metric_rows(bundle, data, split))
    _log(args, f"wrote bundle and metrics under {out}")
    return EXIT_OK


def _derive_seed(base: int, cell: int) -> int:
    return int(np.random.SeedSequence([int(base), int(cell)]).generate_state(1)[0])


def _sweep_cell(task: tuple) -> dict:
    index, use_pca, beta, d, cfg, data_path, out_dir, keep = task
    row = {"schema": SWEEP_SCHEMA, "cell": index, "use_pca": use_pca, "beta": beta, "d": d,
           "status": "ok", "message": ""}
    try:
        data = load_matrix(data_path)
        split = split_dataset(data.n_samples, cfg["split"]["train_fraction"], cfg["split"]["seed"])
        pconf = pipeline_config_from_run(
            cfg, use_pca=use_pca, beta=beta, latent_dim=d,
            train_seed=_derive_seed(cfg["pipeline"]["train"]["seed"], index),
            gpr_seed=_derive_seed(cfg["pipeline"]["gpr"]["seed"], index))
        bundle = train_surrogate(data, split, pconf)

        test = split.test
        test_conditions = [data.conditions[i] for i in test]
        truth = data.values[:, test]
        recon = reconstruct_fields(bundle, truth)
        row["recon_rmse"] = float(np.sqrt(np.mean((recon - truth) ** 2)))
        row["recon_rmse_mean"] = float(np.mean(np.sqrt(np.mean((recon - truth) ** 2, axis=0))))
        report = compute_report(predict_cp(bundle, test_conditions).values, truth)
        row["surrogate_mae"] = report.mae
        row["surrogate_rmse"] = report.rmse
        row["surrogate_r2"] = report.r2

        mu_train = encode_latents(bundle, data.values[:, split.train])
        mu_bar = mu_train.mean(axis=1)
        mu_test = encode_latents(bundle, truth)
        mu_hat, _ = gpr_predict(bundle.gpr, np.array([[c.mach, c.alpha] for c in test_conditions]))
        nrmse = np.array([nrmse_latent(mu_test[:, i], mu_hat[i], mu_bar) for i in range(len(test))])
        row["nrmse_mean"] = float(np.mean(nrmse))
        row["nrmse_median"] = float(np.median(nrmse))
        row["nrmse_p95"] = float(np.quantile(nrmse, 0.95))

        if keep:
            cell_dir = Path(out_dir) / "cells" / f"cell{index:03d}_pca{int(use_pca)}_beta{beta!r}_d{d}"
            save_bundle(bundle, cell_dir)
    except Exception as exc:  # cell failures are recorded, the sweep continues
        row["status"] = "failed"
        row["message"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    sweep = cfg["sweep"]
    if not Path(args.data).is_file():
        raise MatrixFormatError(f"{args.data}: no such data file")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = list(itertools.product(sweep["use_pca"], sweep["betas"], sweep["latent_dims"]))
    tasks = [(i, use_pca, beta, d, cfg, str(args.data), str(out), sweep["keep_bundles"])
             for i, (use_pca, beta, d) in enumerate(cells)]
    jobs = max(1, getattr(args, "jobs", 1) or 1)
    _log(args, f"sweep: {len(tasks)} cells, {jobs} worker(s)")
    if jobs == 1:
        rows = [_sweep_cell(task) for task in tasks]
    else:
        with multiprocessing.Pool(processes=jobs) as pool:
            rows = pool.map(_sweep_cell, tasks)
    rows.sort(key=lambda r: r["cell"])
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        _log(args, f"cell {r['cell']} failed: {r['message']}")
    _log(args, f"wrote {out / 'sweep.csv'} ({len(rows) - len(failed)}/{len(rows)} cells ok)")
    return EXIT_TRAIN if failed else EXIT_OK


def cmd_evaluate(args) -> int:
    bundle = load_bundle(args.bundle)
    data = load_matrix(args.data)
    split = _split_for_bundle(bundle, data.n_samples)
    if split is None:
        _log(args, "data does not match the bundle's training provenance; labeling all samples 'all'")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, _metric_rows(bundle, data, split))
    _write_csv(out / "per_sample.csv", ["index", "mach", "alpha", "split", "mae", "rmse", "nrmse_latent"],
               _per_sample_rows(bundle, data, split))
    _log(args, f"wrote metrics under {out}")
    return EXIT_OK


def cmd_finetune(args) -> int:
    cfg = _load_config(args)
    bundle = load_bundle(args.bundle)
    data = load_matrix(args.data)
    split = _split_for_bundle(bundle, data.n_samples)
    if split is None:
        raise ConfigError("data file does not match the bundle's training provenance")
    tune = train_config_from_section(cfg["finetune"])
    pre_rows = [{**row, "phase": "pre"} for row in _metric_rows(bundle, data, split)]
    tuned = fine_tune_decoder(bundle, data, split, tune)
    post_rows = [{**row, "phase": "post"} for row in _metric_rows(tuned, data, split)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_bundle(tuned, out / "bundle")
    _write_csv(out / "finetune_metrics.csv", ["phase"] + METRIC_COLUMNS, pre_rows + post_rows)
    _log(args, f"wrote fine-tuned bundle and comparison under {out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = load_bundle(args.bundle)
    condition = FlightCondition(args.mach, args.alpha)
    prediction = predict_cp(bundle, [condition])
    if prediction.outside_envelope[0]:
        _log(args, f"warning: ({args.mach}, {args.alpha}) lies outside the training envelope")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    xi, eta = bundle.grid.flat_coords()
    field = prediction.values[:, 0]
    _write_csv(out, ["xi", "eta", "cp_hat"],
               [{"xi": xi[i], "eta": eta[i], "cp_hat": field[i]} for i in range(len(field))])
    stations = bundle.grid.eta_stations()
    n_chord = bundle.grid.n_chord
    for target in SLICE_ETAS:
        j = int(np.argmin(np.abs(stations - target)))
        sl = slice(j * n_chord, (j + 1) * n_chord)
        slice_path = out.with_name(f"{out.stem}_slice_eta{target:g}{out.suffix or '.csv'}")
        _write_csv(slice_path, ["xi", "cp_hat"],
                   [{"xi": x, "cp_hat": v} for x, v in zip(xi[sl], field[sl])])
    _log(args, f"wrote field and {len(SLICE_ETAS)} chordwise slices next to {out}")
    return EXIT_OK


def cmd_export_latent(args) -> int:
    bundle = load_bundle(args.bundle)
    data = load_matrix(args.data)
    split = _split_for_bundle(bundle, data.n_samples)
    if split is None:
        raise ConfigError("data file does not match the bundle's training provenance")
    summary = export_latent_summary(bundle, data, split)
    columns = ["mach", "alpha"] + [f"mu_{j + 1}" for j in range(bundle.latent_dim)] \
        + ["split", "is_hull_vertex"]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, columns, summary.rows)
    _log(args, f"wrote {out} (ranking {summary.ranking}, {len(summary.hull_indices)} hull vertices)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpsurro",
                                     description="Pressure-field surrogate modeling pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True, seed=True):
        if config:
            p.add_argument("--config", help="JSON run configuration (defaults embedded)")
        if seed:
            p.add_argument("--seed", type=int, help="override every section seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress logging")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset file")
    add_common(p)
    p.add_argument("--out", required=True, help="output matrix file")
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("train", help="train a surrogate bundle")
    add_common(p)
    p.add_argument("--data", required=True, help="input matrix file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("sweep", help="train over the configured beta/d/PCA grid")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("evaluate", help="evaluate a bundle against a dataset")
    add_common(p, config=False, seed=False)
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("fine-tune", help="fine-tune a bundle's decoder on GPR-predicted latents")
    add_common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_finetune)

    p = sub.add_parser("predict", help="predict one Cp field")
    add_common(p, config=False, seed=False)
    p.add_argument("--bundle", required=True)
    p.add_argument("--mach", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("export-latent", help="export per-sample latent coordinates")
    add_common(p, config=False, seed=False)
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_export_latent)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BundleFormatError as exc:
        print(f"bundle error: {exc}", file=sys.stderr)
        return EXIT_BUNDLE
    except (MatrixFormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingDiverged as exc:
        stage = getattr(exc, "stage", "training")
        print(f"training diverged in {stage}: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except (PipelineStageError, GprFitError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
