"""Command-line entry point.

Subcommands (``generate``, ``gridsearch``, ``train``, ``eval``,
``sweep-lambda``, ``sweep-snr``) read one declarative config (file or
named preset, plus ``--set section.key=value`` overrides) and write
their artifacts, along with the fully resolved config, into the run
directory.  ``SPIKECODEC_NUM_THREADS`` caps the BLAS thread count; it
must be honored before numpy loads, which is why the heavy imports live
inside the command handlers.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

_THREAD_ENV = "SPIKECODEC_NUM_THREADS"


def _apply_thread_override() -> None:
    threads = os.environ.get(_THREAD_ENV)
    if threads:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--preset", choices=["paper", "ci"], help="named built-in config")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a config value")
    parser.add_argument("--out", type=Path, required=True, help="run directory for artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikecodec",
                                     description="Spike encoding of RF channel windows")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build and save a dataset")
    _add_config_options(p)
    p.add_argument("--name", default="dataset", help="basename for the .bin/.json pair")

    p = sub.add_parser("gridsearch", help="optimize baseline encoder parameters")
    _add_config_options(p)
    p.add_argument("--dataset", type=Path, required=True, help="dataset prefix (.bin/.json)")
    p.add_argument("--method", choices=["tbr", "sf", "mw", "all"], default="all")

    p = sub.add_parser("train", help="train the learned spike codec")
    _add_config_options(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--lambda", dest="sparsity_weight", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--precision", choices=["float32", "float64"], default=None)

    p = sub.add_parser("eval", help="compute the metrics table on a test partition")
    _add_config_options(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, default=None, help="trained codec checkpoint")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--baselines", action="store_true",
                   help="also evaluate TBR/SF/MW at the configured parameters")
    p.add_argument("--per-window-json", action="store_true",
                   help="write full per-window arrays next to the CSV")

    p = sub.add_parser("sweep-lambda", help="sparsity/accuracy trade-off sweep")
    _add_config_options(p)
    p.add_argument("--dataset", type=Path, required=True)

    p = sub.add_parser("sweep-snr", help="robustness across per-SNR test sets")
    _add_config_options(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--baselines", action="store_true")

    return parser


def _load_config(args):
    from .config import load_run_config

    return load_run_config(path=args.config, preset=args.preset, overrides=args.overrides)


def _train_cfg_with_flags(cfg, args):
    from dataclasses import replace

    updates = {}
    if args.sparsity_weight is not None:
        updates["sparsity_weight"] = args.sparsity_weight
    if args.tau is not None:
        updates["spike_threshold"] = args.tau
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.epochs is not None:
        updates["max_epochs"] = args.epochs
    if args.batch_size is not None:
        updates["batch_size"] = args.batch_size
    if args.precision is not None:
        updates["precision"] = args.precision
    return replace(cfg.training, **updates) if updates else cfg.training


def cmd_generate(args) -> int:
    from .config import write_resolved_config
    from .signals import build_dataset, save_dataset

    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, args.out)
    dataset = build_dataset(cfg.generator)
    bin_path, json_path = save_dataset(dataset, args.out / args.name)
    sizes = {name: len(idx) for name, idx in dataset.splits.items()}
    print(f"wrote {bin_path} and {json_path}: {len(dataset)} windows, splits {sizes}")
    return 0


def cmd_gridsearch(args) -> int:
    from .baselines import METHODS, grid_search, write_grid_csv
    from .config import write_resolved_config
    from .signals import load_dataset
    import json

    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, args.out)
    dataset = load_dataset(args.dataset)
    methods = METHODS if args.method == "all" else (args.method,)
    best = {}
    for method in methods:
        result = grid_search(method, dataset, grid=cfg.baselines.grid_for(method))
        write_grid_csv(result, args.out / f"gridsearch_{method}.csv")
        best[method] = {k: v for k, v in {
            "delta": result.best.delta,
            "threshold": result.best.threshold,
            "window": result.best.window,
        }.items() if v is not None}
        print(f"{method}: best {best[method]}")
    (args.out / "best_params.json").write_text(json.dumps(best, indent=1))
    return 0


def cmd_train(args) -> int:
    from .config import write_resolved_config
    from .model import save_checkpoint
    from .signals import load_dataset
    from .training import train, write_training_log
    from dataclasses import replace as dc_replace

    cfg = _load_config(args)
    train_cfg = _train_cfg_with_flags(cfg, args)
    cfg = dc_replace(cfg, training=train_cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, args.out)
    dataset = load_dataset(args.dataset)
    result = train(dataset, train_cfg)
    write_training_log(result.log, args.out / "training_log.csv")
    ckpt = save_checkpoint(result.model, args.out / "best.ckpt", metadata={
        "best_epoch": result.best_epoch,
        "best_val_total": result.best_val_total,
        "epochs_run": result.epochs_run,
        "train_config": train_cfg.to_dict(),
    })
    print(f"trained {result.epochs_run} epochs; best val total "
          f"{result.best_val_total:.6f} at epoch {result.best_epoch}; wrote {ckpt}")
    return 0


def cmd_eval(args) -> int:
    from .baselines import BaselineParams
    from .config import write_resolved_config
    from .evaluation import evaluate_method, write_metrics_csv, write_report_json
    from .model import load_checkpoint
    from .signals import load_dataset

    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, args.out)
    dataset = load_dataset(args.dataset)
    windows = dataset.subset(args.split)
    methods: list[tuple[str, object]] = []
    if args.checkpoint is not None:
        model, _ = load_checkpoint(args.checkpoint)
        methods.append(("lse", model))
    if args.baselines or args.checkpoint is None:
        b = cfg.baselines
        methods += [
            ("tbr", BaselineParams("tbr", delta=b.tbr_delta)),
            ("sf", BaselineParams("sf", threshold=b.sf_threshold)),
            ("mw", BaselineParams("mw", threshold=b.mw_threshold, window=b.mw_window)),
        ]
    reports = []
    for label, method in methods:
        report = evaluate_method(method, windows, keep_per_window=args.per_window_json)
        report.method = label
        reports.append(report)
        print(f"{label}: rec {report.rec_rmse_mean:.3f}±{report.rec_rmse_std:.3f}  "
              f"dft {report.dft_rmse_mean:.3f}±{report.dft_rmse_std:.3f}  "
              f"sparsity {report.sparsity_mean:.3f}")
        if args.per_window_json:
            write_report_json(report, args.out / f"metrics_{label}.json")
    write_metrics_csv(reports, args.out / "metrics.csv")
    return 0


def cmd_sweep_lambda(args) -> int:
    from .config import write_resolved_config
    from .evaluation import lambda_sweep, write_rows_csv, write_xy_series
    from .signals import load_dataset

    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, args.out)
    dataset = load_dataset(args.dataset)

    def progress(lam, seed_index, report):
        print(f"lambda={lam} seed#{seed_index}: sparsity {report.sparsity_mean:.3f} "
              f"rec {report.rec_rmse_mean:.3f}")

    rows = lambda_sweep(dataset, list(cfg.evaluation.lambda_grid),
                        cfg.evaluation.lambda_seeds, cfg.training, progress=progress)
    write_rows_csv(rows, args.out / "lambda_sweep.csv")
    lams = [r["lambda"] for r in rows]
    write_xy_series(args.out / "sparsity_vs_lambda.txt", lams,
                    [r["mean_sparsity"] for r in rows], [r["std_sparsity"] for r in rows])
    write_xy_series(args.out / "valmse_vs_lambda.txt", lams,
                    [r["mean_val_mse"] for r in rows], [r["std_val_mse"] for r in rows])
    return 0


def cmd_sweep_snr(args) -> int:
    from .baselines import BaselineParams
    from .config import write_resolved_config
    from .evaluation import snr_sweep, write_rows_csv, write_xy_series
    from .model import load_checkpoint

    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, args.out)
    model, _ = load_checkpoint(args.checkpoint)
    methods: dict[str, object] = {"lse": model}
    if args.baselines:
        b = cfg.baselines
        methods.update({
            "tbr": BaselineParams("tbr", delta=b.tbr_delta),
            "sf": BaselineParams("sf", threshold=b.sf_threshold),
            "mw": BaselineParams("mw", threshold=b.mw_threshold, window=b.mw_window),
        })
    rows = snr_sweep(methods, list(cfg.evaluation.snr_grid),
                     cfg.evaluation.snr_windows, cfg.generator)
    write_rows_csv(rows, args.out / "snr_sweep.csv")
    for label in methods:
        series = [r for r in rows if r["method"] == label]
        write_xy_series(args.out / f"rec_vs_snr_{label}.txt",
                        [r["snr_db"] for r in series],
                        [r["rec_rmse_mean"] for r in series],
                        [r["rec_rmse_std"] for r in series])
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "gridsearch": cmd_gridsearch,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-lambda": cmd_sweep_lambda,
    "sweep-snr": cmd_sweep_snr,
}


def main(argv: list[str] | None = None) -> int:
    _apply_thread_override()
    args = build_parser().parse_args(argv)
    from .config import ConfigError
    from .model import CheckpointError
    from .signals import DatasetFormatError

    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, CheckpointError, DatasetFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
