"""Metrics and experiment suites.

Per-window metrics: reconstruction RMSE in normalized space, RMSE of the
DFT magnitude (both spectra scaled by the original window's peak
magnitude), spike-train sparsity (fraction of zeros), and — for the
learned codec — frequency/amplitude regression RMSE.  On top of those,
the two sweep drivers reproduce the sparsity-vs-regularization and
robustness-vs-SNR experiments.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .autodiff import Tensor, no_grad
from .baselines import BaselineParams, decode_temporal_contrast, encode_window
from .model import SpikeCodec
from .signals import Dataset, GeneratorConfig, WindowSet, build_dataset, single_snr_config
from .training import TrainConfig, train


def rec_rmse(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Root of the per-window mean squared error over all 2K entries."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    return float(np.sqrt(np.mean((x - x_hat) ** 2)))


def dft_mag_rmse(x: np.ndarray, x_hat: np.ndarray) -> float:
    """RMSE between DFT magnitudes of the complex windows.

    Rows are reinterpreted as real/imaginary parts (normalized space,
    no de-normalization); both spectra are divided by the peak magnitude
    of the original window so the error is scale-free.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    spec = np.fft.fft(x[0] + 1j * x[1])
    spec_hat = np.fft.fft(x_hat[0] + 1j * x_hat[1])
    peak = float(np.abs(spec).max())
    if peak == 0.0:
        peak = 1.0
    diff = (np.abs(spec) - np.abs(spec_hat)) / peak
    return float(np.sqrt(np.mean(diff ** 2)))


def sparsity(z: np.ndarray) -> float:
    """Fraction of zeros in a ternary spike train."""
    z = np.asarray(z)
    return float(np.mean(z == 0))


def spike_density(z: np.ndarray) -> float:
    """Mean absolute spike value; complements sparsity to exactly 1."""
    return float(np.mean(np.abs(np.asarray(z, dtype=np.float64))))


@dataclass
class MetricsReport:
    method: str
    n_windows: int
    rec_rmse_mean: float
    rec_rmse_std: float
    dft_rmse_mean: float
    dft_rmse_std: float
    sparsity_mean: float
    sparsity_std: float
    freq_rmse_mean: float | None = None
    freq_rmse_std: float | None = None
    amp_rmse_mean: float | None = None
    amp_rmse_std: float | None = None
    per_window: dict[str, np.ndarray] | None = None
    config: dict | None = None


def _aggregate(method: str, per_window: dict[str, np.ndarray],
               config: dict | None, keep_per_window: bool) -> MetricsReport:
    def ms(key):
        arr = per_window.get(key)
        if arr is None:
            return None, None
        return float(arr.mean()), float(arr.std())

    rec_m, rec_s = ms("rec_rmse")
    dft_m, dft_s = ms("dft_rmse")
    sp_m, sp_s = ms("sparsity")
    f_m, f_s = ms("freq_rmse")
    a_m, a_s = ms("amp_rmse")
    return MetricsReport(
        method=method, n_windows=len(per_window["rec_rmse"]),
        rec_rmse_mean=rec_m, rec_rmse_std=rec_s,
        dft_rmse_mean=dft_m, dft_rmse_std=dft_s,
        sparsity_mean=sp_m, sparsity_std=sp_s,
        freq_rmse_mean=f_m, freq_rmse_std=f_s,
        amp_rmse_mean=a_m, amp_rmse_std=a_s,
        per_window=per_window if keep_per_window else None,
        config=config,
    )


def evaluate_baseline(params: BaselineParams, windows: WindowSet,
                      keep_per_window: bool = False) -> MetricsReport:
    if len(windows) == 0:
        raise ValueError("cannot evaluate on an empty window set")
    n = len(windows)
    rec = np.empty(n)
    dft = np.empty(n)
    rho = np.empty(n)
    for i in range(n):
        x = windows.x[i].astype(np.float64)
        spikes, encodings = encode_window(x, params)
        x_hat = np.stack([decode_temporal_contrast(e) for e in encodings])
        rec[i] = rec_rmse(x, x_hat)
        dft[i] = dft_mag_rmse(x, x_hat)
        rho[i] = sparsity(spikes)
    per_window = {"rec_rmse": rec, "dft_rmse": dft, "sparsity": rho}
    return _aggregate(params.method, per_window, None, keep_per_window)


def evaluate_model(model: SpikeCodec, windows: WindowSet, batch_size: int = 256,
                   label: str = "lse", keep_per_window: bool = False) -> MetricsReport:
    if len(windows) == 0:
        raise ValueError("cannot evaluate on an empty window set")
    n = len(windows)
    rec = np.empty(n)
    dft = np.empty(n)
    rho = np.empty(n)
    f_err = np.empty(n)
    a_err = np.empty(n)
    with no_grad():
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            x = windows.x[start:stop].astype(model.dtype)
            out = model.forward(Tensor(x), training=False)
            x_hat = out.reconstruction.data
            z = out.spikes.data
            f_hat = out.freqs.data
            a_hat = out.amps.data
            for j in range(stop - start):
                i = start + j
                rec[i] = rec_rmse(x[j], x_hat[j])
                dft[i] = dft_mag_rmse(x[j], x_hat[j])
                rho[i] = sparsity(z[j])
                f_err[i] = np.sqrt(np.mean((windows.freqs[i] - f_hat[j]) ** 2))
                a_err[i] = np.sqrt(np.mean((windows.amps[i] - a_hat[j]) ** 2))
    per_window = {"rec_rmse": rec, "dft_rmse": dft, "sparsity": rho,
                  "freq_rmse": f_err, "amp_rmse": a_err}
    return _aggregate(label, per_window, model.hyperparameters(), keep_per_window)


def evaluate_method(method, windows: WindowSet, **kwargs) -> MetricsReport:
    """Dispatch on a trained model or baseline parameters."""
    if isinstance(method, SpikeCodec):
        return evaluate_model(method, windows, **kwargs)
    if isinstance(method, BaselineParams):
        return evaluate_baseline(method, windows, **kwargs)
    raise TypeError(f"cannot evaluate {type(method).__name__}")


# -- sweeps ---------------------------------------------------------------


def lambda_sweep(dataset: Dataset, lambdas: list[float], n_seeds: int,
                 base_cfg: TrainConfig, progress=None) -> list[dict]:
    """Train per (lambda, seed); report mean validation sparsity and MSE."""
    rows = []
    for lam in lambdas:
        if not 0.0 <= lam <= 1.0:
            raise ValueError("lambda values must lie in [0, 1]")
        sparsities = []
        val_mses = []
        for s in range(n_seeds):
            cfg = replace(base_cfg, sparsity_weight=lam, seed=base_cfg.seed + 1000 * s)
            result = train(dataset, cfg)
            report = evaluate_model(result.model, dataset.val, batch_size=cfg.batch_size)
            sparsities.append(report.sparsity_mean)
            val_mses.append(report.rec_rmse_mean ** 2)
            if progress is not None:
                progress(lam, s, report)
        rows.append({
            "lambda": lam,
            "n_seeds": n_seeds,
            "mean_sparsity": float(np.mean(sparsities)),
            "std_sparsity": float(np.std(sparsities)),
            "mean_val_mse": float(np.mean(val_mses)),
            "std_val_mse": float(np.std(val_mses)),
        })
    return rows


def snr_sweep(methods: dict[str, object], snr_list: list[float], n_windows: int,
              gen_cfg: GeneratorConfig, seed: int = 7_000) -> list[dict]:
    """Evaluate every method on fresh single-SNR test sets."""
    rows = []
    for i, snr in enumerate(snr_list):
        cfg = single_snr_config(gen_cfg, snr, n_windows, seed + i)
        windows = build_dataset(cfg).test
        for label, method in methods.items():
            report = evaluate_method(method, windows)
            rows.append({
                "method": label,
                "snr_db": float(snr),
                "rec_rmse_mean": report.rec_rmse_mean,
                "rec_rmse_std": report.rec_rmse_std,
                "dft_rmse_mean": report.dft_rmse_mean,
                "dft_rmse_std": report.dft_rmse_std,
                "sparsity_mean": report.sparsity_mean,
            })
    return rows


def rank_correlation(x, y) -> float:
    """Spearman rank correlation (average ranks on ties)."""
    def ranks(v):
        v = np.asarray(v, dtype=np.float64)
        order = np.argsort(v, kind="stable")
        r = np.empty(len(v))
        r[order] = np.arange(1, len(v) + 1)
        for value in np.unique(v):
            mask = v == value
            if mask.sum() > 1:
                r[mask] = r[mask].mean()
        return r

    rx, ry = ranks(x), ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx ** 2).sum() * (ry ** 2).sum())
    if denom == 0:
        return 0.0
    return float((rx * ry).sum() / denom)


def count_increases(values) -> int:
    """Number of adjacent pairs that strictly increase."""
    v = np.asarray(values, dtype=np.float64)
    return int(np.sum(np.diff(v) > 0))


# -- writers --------------------------------------------------------------

METRICS_COLUMNS = ["method", "n_windows", "rec_rmse_mean", "rec_rmse_std",
                   "dft_rmse_mean", "dft_rmse_std", "sparsity_mean", "sparsity_std",
                   "freq_rmse_mean", "freq_rmse_std", "amp_rmse_mean", "amp_rmse_std"]


def write_metrics_csv(reports: list[MetricsReport], path: str | Path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for r in reports:
            writer.writerow([getattr(r, c) if getattr(r, c) is not None else ""
                             for c in METRICS_COLUMNS])


def write_report_json(report: MetricsReport, path: str | Path) -> None:
    payload = {c: getattr(report, c) for c in METRICS_COLUMNS}
    if report.per_window is not None:
        payload["per_window"] = {k: v.tolist() for k, v in report.per_window.items()}
    if report.config is not None:
        payload["config"] = report.config
    Path(path).write_text(json.dumps(payload, indent=1))


def write_rows_csv(rows: list[dict], path: str | Path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(Path(path), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_xy_series(path: str | Path, x, y, y_std=None) -> None:
    """Two- or three-column whitespace text file for external plotting."""
    lines = []
    for i in range(len(x)):
        parts = [repr(float(x[i])), repr(float(y[i]))]
        if y_std is not None:
            parts.append(repr(float(y_std[i])))
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")
