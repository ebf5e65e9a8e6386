"""Synthetic sum-of-sinusoids channel-response windows.

Each window is a noisy mixture of up to ``max_components`` complex
sinusoids sampled at period ``sampling_period`` over ``window_length``
samples.  Windows are turned into (2, K) real tensors (real/imaginary
rows), jointly min-max normalized to [0, 1], and packaged into
reproducible train/val/test datasets with normalized regression targets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

DATASET_FORMAT_VERSION = 1

# per-window ground-truth vector layout in the binary file, in order:
# f_norm (M_max), amps (M_max), offset, scale, m_active, snr_db
GT_EXTRA_FIELDS = ("offset", "scale", "m_active", "snr_db")


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the synthetic channel generator."""

    sampling_period: float = 0.27e-3
    window_length: int = 64
    carrier_freq_hz: float = 60e9
    max_components: int = 5
    snr_db_set: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0)
    windows_per_count: int = 3000
    split: tuple[float, float, float] = (0.75, 0.15, 0.10)
    seed: int = 0

    def __post_init__(self):
        if self.sampling_period <= 0:
            raise ValueError("sampling_period must be positive")
        if self.window_length < 2:
            raise ValueError("window_length must be at least 2")
        if self.max_components < 1:
            raise ValueError("max_components must be at least 1")
        if not self.snr_db_set:
            raise ValueError("snr_db_set must not be empty")
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if any(f < 0 for f in self.split):
            raise ValueError("split fractions must be non-negative")

    @property
    def max_frequency_hz(self) -> float:
        """Half the sampling rate, the upper edge of the drawn frequencies."""
        return 1.0 / (2.0 * self.sampling_period)

    @property
    def total_windows(self) -> int:
        return self.windows_per_count * self.max_components

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_db_set"] = list(self.snr_db_set)
        d["split"] = list(self.split)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        d["snr_db_set"] = tuple(float(s) for s in d["snr_db_set"])
        d["split"] = tuple(float(s) for s in d["split"])
        return cls(**d)


@dataclass
class GroundTruth:
    """True sinusoid parameters of one window, in physical units.

    Active components are sorted by ascending frequency; the trailing
    ``max_components - m_active`` slots are zeroed.  ``snr_db`` of None
    means a noiseless window.
    """

    freqs_hz: np.ndarray
    amps: np.ndarray
    phases: np.ndarray
    m_active: int
    snr_db: float | None


@dataclass
class ChannelWindow:
    samples: np.ndarray  # complex, shape (K,)
    gt: GroundTruth


@dataclass
class RealWindow:
    """Normalized (2, K) view of a window plus its regression targets."""

    values: np.ndarray   # (2, K), in [0, 1]
    offset: float
    scale: float
    freqs: np.ndarray    # normalized to [0, 1] via f * 2T
    amps: np.ndarray
    m_active: int
    snr_db: float


@dataclass
class WindowSet:
    """One dataset partition (views into the parent arrays)."""

    x: np.ndarray        # (n, 2, K)
    freqs: np.ndarray    # (n, M_max)
    amps: np.ndarray     # (n, M_max)
    norm: np.ndarray     # (n, 2): offset, scale
    m_active: np.ndarray
    snr_db: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass
class Dataset:
    x: np.ndarray
    freqs: np.ndarray
    amps: np.ndarray
    norm: np.ndarray
    m_active: np.ndarray
    snr_db: np.ndarray
    splits: dict[str, np.ndarray] = field(default_factory=dict)
    config: GeneratorConfig | None = None

    def subset(self, name: str) -> WindowSet:
        idx = self.splits[name]
        return WindowSet(self.x[idx], self.freqs[idx], self.amps[idx],
                         self.norm[idx], self.m_active[idx], self.snr_db[idx])

    @property
    def train(self) -> WindowSet:
        return self.subset("train")

    @property
    def val(self) -> WindowSet:
        return self.subset("val")

    @property
    def test(self) -> WindowSet:
        return self.subset("test")

    def __len__(self) -> int:
        return self.x.shape[0]


def sample_ground_truth(m_active: int, cfg: GeneratorConfig, rng: np.random.Generator) -> GroundTruth:
    """Draw one window's sinusoid parameters.

    Frequencies are uniform in [0, 1/(2T)], phases uniform in [0, 2pi),
    amplitudes uniform in (0, 1] rescaled so the largest is exactly 1.
    Active slots are sorted by ascending frequency, inactive slots trail
    with zero frequency and amplitude.
    """
    m_max = cfg.max_components
    if not 1 <= m_active <= m_max:
        raise ValueError(f"m_active must be in [1, {m_max}], got {m_active}")
    freqs = np.zeros(m_max)
    amps = np.zeros(m_max)
    phases = np.zeros(m_max)
    f = rng.uniform(0.0, cfg.max_frequency_hz, size=m_active)
    a = 1.0 - rng.uniform(0.0, 1.0, size=m_active)  # uniform in (0, 1]
    a /= a.max()
    p = rng.uniform(0.0, 2.0 * np.pi, size=m_active)
    order = np.argsort(f, kind="stable")
    freqs[:m_active] = f[order]
    amps[:m_active] = a[order]
    phases[:m_active] = p[order]
    snr_db = float(rng.choice(np.asarray(cfg.snr_db_set, dtype=float)))
    return GroundTruth(freqs, amps, phases, m_active, snr_db)


def generate_window(gt: GroundTruth, cfg: GeneratorConfig, rng: np.random.Generator) -> ChannelWindow:
    """Synthesize the complex window for a parameter draw.

    Noise is complex Gaussian with total variance sigma_w^2 chosen so
    that (sum_m a_m^2) / sigma_w^2 matches the configured SNR.
    """
    k = np.arange(cfg.window_length)
    t = k * cfg.sampling_period
    active = gt.amps > 0
    phase = 2.0 * np.pi * np.outer(gt.freqs_hz[active], t) + gt.phases[active][:, None]
    samples = (gt.amps[active][:, None] * np.exp(1j * phase)).sum(axis=0)
    if gt.snr_db is not None:
        signal_power = float(np.sum(gt.amps ** 2))
        noise_var = signal_power / (10.0 ** (gt.snr_db / 10.0))
        scale = np.sqrt(noise_var / 2.0)
        noise = scale * (rng.standard_normal(cfg.window_length)
                         + 1j * rng.standard_normal(cfg.window_length))
        samples = samples + noise
    return ChannelWindow(samples.astype(np.complex128), gt)


def to_real_window(window: ChannelWindow, cfg: GeneratorConfig) -> RealWindow:
    """Stack real/imaginary rows and min-max normalize jointly to [0, 1].

    A constant window (max == min over both rows) uses scale 1 and
    offset min.  Targets are normalized alongside: f_norm = f * 2T.
    """
    values = np.stack([window.samples.real, window.samples.imag])
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        offset, scale = lo, 1.0
    else:
        offset, scale = lo, hi - lo
    normalized = (values - offset) / scale
    gt = window.gt
    f_norm = gt.freqs_hz * (2.0 * cfg.sampling_period)
    return RealWindow(values=normalized, offset=offset, scale=scale,
                      freqs=f_norm.copy(), amps=gt.amps.copy(),
                      m_active=gt.m_active,
                      snr_db=float("nan") if gt.snr_db is None else float(gt.snr_db))


def denormalize(values: np.ndarray, offset: float, scale: float) -> np.ndarray:
    return values * scale + offset


def window_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-window stream: independent of generation order."""
    return np.random.default_rng([seed, 0, index])


def build_dataset(cfg: GeneratorConfig, dtype=np.float32) -> Dataset:
    """Generate, shuffle and split the full dataset, reproducibly from the seed."""
    n = cfg.total_windows
    m_max = cfg.max_components
    k = cfg.window_length
    x = np.empty((n, 2, k), dtype=dtype)
    freqs = np.empty((n, m_max), dtype=dtype)
    amps = np.empty((n, m_max), dtype=dtype)
    norm = np.empty((n, 2), dtype=dtype)
    m_active = np.empty(n, dtype=np.int64)
    snr_db = np.empty(n, dtype=dtype)

    index = 0
    for count in range(1, m_max + 1):
        for _ in range(cfg.windows_per_count):
            rng = window_rng(cfg.seed, index)
            gt = sample_ground_truth(count, cfg, rng)
            rw = to_real_window(generate_window(gt, cfg, rng), cfg)
            x[index] = rw.values
            freqs[index] = rw.freqs
            amps[index] = rw.amps
            norm[index] = (rw.offset, rw.scale)
            m_active[index] = rw.m_active
            snr_db[index] = rw.snr_db
            index += 1

    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    order = shuffle_rng.permutation(n)
    n_train = int(np.floor(cfg.split[0] * n))
    n_val = int(np.floor(cfg.split[1] * n))
    splits = {
        "train": order[:n_train],
        "val": order[n_train:n_train + n_val],
        "test": order[n_train + n_val:],
    }
    return Dataset(x=x, freqs=freqs, amps=amps, norm=norm, m_active=m_active,
                   snr_db=snr_db, splits=splits, config=cfg)


def save_dataset(dataset: Dataset, prefix: str | Path) -> tuple[Path, Path]:
    """Write ``<prefix>.bin`` (little-endian float32) and ``<prefix>.json``.

    The binary file holds all window tensors (N, 2, K) followed by all
    per-window ground-truth vectors laid out as documented in the
    manifest's ``gt_layout``.
    """
    prefix = Path(prefix)
    n = len(dataset)
    m_max = dataset.freqs.shape[1]
    gt_width = 2 * m_max + len(GT_EXTRA_FIELDS)
    gt = np.empty((n, gt_width), dtype="<f4")
    gt[:, :m_max] = dataset.freqs
    gt[:, m_max:2 * m_max] = dataset.amps
    gt[:, 2 * m_max] = dataset.norm[:, 0]
    gt[:, 2 * m_max + 1] = dataset.norm[:, 1]
    gt[:, 2 * m_max + 2] = dataset.m_active
    gt[:, 2 * m_max + 3] = dataset.snr_db

    bin_path = prefix.with_suffix(".bin")
    with open(bin_path, "wb") as fh:
        fh.write(np.ascontiguousarray(dataset.x, dtype="<f4").tobytes())
        fh.write(gt.tobytes())

    manifest = {
        "version": DATASET_FORMAT_VERSION,
        "dtype": "<f4",
        "window_count": n,
        "window_length": dataset.x.shape[2],
        "max_components": m_max,
        "gt_layout": [f"f_norm[{m_max}]", f"amps[{m_max}]", *GT_EXTRA_FIELDS],
        "gt_width": gt_width,
        "counts": {name: int(len(idx)) for name, idx in dataset.splits.items()},
        "split_indices": {name: idx.tolist() for name, idx in dataset.splits.items()},
        "seed": dataset.config.seed if dataset.config else None,
        "generator": dataset.config.to_dict() if dataset.config else None,
    }
    json_path = prefix.with_suffix(".json")
    json_path.write_text(json.dumps(manifest, indent=1))
    return bin_path, json_path


class DatasetFormatError(ValueError):
    """Raised when a dataset file pair is inconsistent or unsupported."""


def load_dataset(prefix: str | Path, dtype=np.float32) -> Dataset:
    prefix = Path(prefix)
    manifest = json.loads(prefix.with_suffix(".json").read_text())
    if manifest.get("version") != DATASET_FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported dataset version {manifest.get('version')!r}")
    n = manifest["window_count"]
    k = manifest["window_length"]
    m_max = manifest["max_components"]
    gt_width = manifest["gt_width"]
    raw = np.fromfile(prefix.with_suffix(".bin"), dtype="<f4")
    expected = n * 2 * k + n * gt_width
    if raw.size != expected:
        raise DatasetFormatError(
            f"dataset blob holds {raw.size} floats, manifest expects {expected}")
    x = raw[:n * 2 * k].reshape(n, 2, k).astype(dtype)
    gt = raw[n * 2 * k:].reshape(n, gt_width)
    splits = {name: np.asarray(idx, dtype=np.int64)
              for name, idx in manifest["split_indices"].items()}
    cfg = GeneratorConfig.from_dict(manifest["generator"]) if manifest.get("generator") else None
    return Dataset(
        x=x,
        freqs=gt[:, :m_max].astype(dtype),
        amps=gt[:, m_max:2 * m_max].astype(dtype),
        norm=gt[:, 2 * m_max:2 * m_max + 2].astype(dtype),
        m_active=gt[:, 2 * m_max + 2].astype(np.int64),
        snr_db=gt[:, 2 * m_max + 3].astype(dtype),
        splits=splits,
        config=cfg,
    )


def single_snr_config(cfg: GeneratorConfig, snr_db: float, n_windows: int, seed: int) -> GeneratorConfig:
    """Config for a fresh all-test set at one SNR (used by the SNR sweep)."""
    per_count = max(1, int(np.ceil(n_windows / cfg.max_components)))
    return replace(cfg, snr_db_set=(float(snr_db),), windows_per_count=per_count,
                   split=(0.0, 0.0, 1.0), seed=seed)
