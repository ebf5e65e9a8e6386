"""Temporal-contrast spike encoders (TBR, SF, MW) and their decoder.

All three encode a real sequence into a ternary spike train by
thresholding signal changes.  Real and imaginary channels of a window
are encoded independently.  Reconstruction integrates the spikes with
the per-sequence threshold as step size, which gives the baselines a
measurable reconstruction error to compare against the learned codec.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .signals import Dataset

METHODS = ("tbr", "sf", "mw")

# published search grids: (values are the grid points, not ranges)
DEFAULT_GRIDS = {
    "tbr": {"delta": [round(0.001 * i, 3) for i in range(1, 11)]},
    "sf": {"threshold": [round(0.05 * i, 2) for i in range(1, 7)]},
    "mw": {
        "threshold": [round(0.01 + 0.05 * i, 2) for i in range(0, 12)],
        "window": [2, 3, 4],
    },
}

# grid-search optima reported for this generator configuration
TABLE_OPTIMA = {
    "tbr": {"delta": 0.005},
    "sf": {"threshold": 0.2},
    "mw": {"threshold": 0.06, "window": 3},
}


@dataclass(frozen=True)
class BaselineParams:
    method: str
    delta: float | None = None
    threshold: float | None = None
    window: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.method == "tbr":
            if self.delta is None or self.delta <= 0:
                raise ValueError("tbr requires delta > 0")
        else:
            if self.threshold is None or self.threshold <= 0:
                raise ValueError(f"{self.method} requires threshold > 0")
        if self.method == "mw" and (self.window is None or self.window < 2):
            raise ValueError("mw requires window >= 2")


def table_optimum(method: str) -> BaselineParams:
    return BaselineParams(method=method, **TABLE_OPTIMA[method])


@dataclass
class BaselineEncoding:
    """Spike train plus what the decoder needs to invert it."""

    spikes: np.ndarray           # (K,), values in {-1, 0, +1}
    effective_threshold: float   # >= 0
    x0: float                    # first sample, the integration seed


def encode_tbr(x: np.ndarray, delta: float) -> BaselineEncoding:
    """Spike where the first-order difference exceeds mean + delta*std.

    The statistics are taken over the signed differences of this
    sequence (population std); the stored decode threshold is clamped
    to zero from below.
    """
    x = np.asarray(x, dtype=np.float64)
    diffs = np.diff(x)
    threshold = float(diffs.mean() + delta * diffs.std())
    spikes = np.zeros(x.shape[0], dtype=np.int8)
    fire = np.abs(diffs) > threshold
    spikes[1:] = np.sign(diffs).astype(np.int8) * fire
    return BaselineEncoding(spikes, max(threshold, 0.0), float(x[0]))


def encode_sf(x: np.ndarray, threshold: float) -> BaselineEncoding:
    """Spike when the signal leaves a baseline that tracks the last spike value."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    x = np.asarray(x, dtype=np.float64)
    spikes = np.zeros(x.shape[0], dtype=np.int8)
    base = x[0]
    for k in range(1, x.shape[0]):
        if x[k] - base > threshold:
            spikes[k] = 1
            base = x[k]
        elif base - x[k] > threshold:
            spikes[k] = -1
            base = x[k]
    return BaselineEncoding(spikes, float(threshold), float(x[0]))


def _trailing_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Mean of the last ``window`` samples including the current one;
    shorter prefixes use every sample available."""
    csum = np.concatenate(([0.0], np.cumsum(x)))
    k = np.arange(1, x.shape[0] + 1)
    lengths = np.minimum(k, window)
    return (csum[k] - csum[k - lengths]) / lengths


def encode_mw(x: np.ndarray, threshold: float, window: int) -> BaselineEncoding:
    """SF variant whose baseline is the trailing moving average."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if window < 2:
        raise ValueError("window must be at least 2")
    x = np.asarray(x, dtype=np.float64)
    deviation = x - _trailing_mean(x, window)
    spikes = np.zeros(x.shape[0], dtype=np.int8)
    fire = np.abs(deviation[1:]) > threshold
    spikes[1:] = np.sign(deviation[1:]).astype(np.int8) * fire
    return BaselineEncoding(spikes, float(threshold), float(x[0]))


def encode(x: np.ndarray, params: BaselineParams) -> BaselineEncoding:
    if params.method == "tbr":
        return encode_tbr(x, params.delta)
    if params.method == "sf":
        return encode_sf(x, params.threshold)
    return encode_mw(x, params.threshold, params.window)


def decode_temporal_contrast(enc: BaselineEncoding) -> np.ndarray:
    """Threshold-weighted cumulative sum seeded with the true first sample."""
    steps = enc.spikes.astype(np.float64) * enc.effective_threshold
    return np.clip(enc.x0 + np.cumsum(steps), 0.0, 1.0)


def encode_window(values: np.ndarray, params: BaselineParams) -> tuple[np.ndarray, list[BaselineEncoding]]:
    """Encode the two rows of a (2, K) window independently.

    Returns the stacked ternary (2, K) spike train and the per-channel
    encodings needed for reconstruction.
    """
    encodings = [encode(values[c], params) for c in range(values.shape[0])]
    spikes = np.stack([e.spikes for e in encodings])
    return spikes, encodings


def reconstruct_window(values: np.ndarray, params: BaselineParams) -> np.ndarray:
    _, encodings = encode_window(values, params)
    return np.stack([decode_temporal_contrast(e) for e in encodings])


@dataclass
class GridSearchResult:
    best: BaselineParams
    rows: list[dict]


def _grid_points(method: str, grid: dict | None) -> list[BaselineParams]:
    grid = dict(DEFAULT_GRIDS[method]) if grid is None else dict(grid)
    keys = sorted(grid)
    points = []
    for combo in product(*(grid[k] for k in keys)):
        points.append(BaselineParams(method=method, **dict(zip(keys, combo))))
    return points


def grid_search(method: str, dataset: Dataset, grid: dict | None = None,
                split: str = "val") -> GridSearchResult:
    """Pick the grid point minimizing mean reconstruction MSE on a partition."""
    points = _grid_points(method, grid)
    if not points:
        raise ValueError("grid search needs at least one candidate point")
    windows = dataset.subset(split).x.astype(np.float64)
    rows = []
    best_idx = 0
    best_mse = np.inf
    for i, params in enumerate(points):
        total = 0.0
        for w in windows:
            err = w - reconstruct_window(w, params)
            total += float(np.mean(err * err))
        mse = total / len(windows)
        rows.append({
            "method": method,
            "delta": params.delta,
            "threshold": params.threshold,
            "window": params.window,
            "mean_mse": mse,
            "optimal": 0,
        })
        if mse < best_mse:
            best_mse = mse
            best_idx = i
    rows[best_idx]["optimal"] = 1
    return GridSearchResult(best=points[best_idx], rows=rows)


def write_grid_csv(result: GridSearchResult, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["method", "delta", "threshold", "window", "mean_mse", "optimal"])
        writer.writeheader()
        for row in result.rows:
            writer.writerow(row)
