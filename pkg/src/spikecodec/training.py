"""End-to-end training of the spike codec with the composite loss.

The loss is the sum of three mean-squared errors (window reconstruction,
frequency regression, amplitude regression, all on [0, 1]-normalized
quantities) plus a spike-density penalty weighted by ``sparsity_weight``.
Early stopping watches the total validation loss; the best-validation
parameter snapshot is restored at the end.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .autodiff import Adam, Tensor, abs_, mean_all, no_grad
from .model import ModelOutput, SpikeCodec
from .signals import Dataset, WindowSet

PRECISIONS = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    learning_rate: float = 1e-3
    sparsity_weight: float = 0.2   # lambda, in [0, 1]
    spike_threshold: float = 0.1   # tau
    surrogate_slope: float = 2.0
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    precision: str = "float32"
    conv_channels: int = 128
    snn_hidden: tuple[int, int] = (128, 64)

    def __post_init__(self):
        if not 0.0 <= self.sparsity_weight <= 1.0:
            raise ValueError("sparsity_weight must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.spike_threshold <= 0:
            raise ValueError("spike_threshold must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {sorted(PRECISIONS)}")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snn_hidden"] = list(self.snn_hidden)
        return d


@dataclass
class LossBreakdown:
    l1: float      # reconstruction MSE
    l2: float      # frequency MSE
    l3: float      # amplitude MSE
    omega: float   # spike density
    total: float


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, batch_index: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch_index}")
        self.epoch = epoch
        self.batch_index = batch_index


def _loss_graph(x: Tensor, x_hat: Tensor, f: Tensor, f_hat: Tensor,
                a: Tensor, a_hat: Tensor, z: Tensor,
                sparsity_weight: float) -> tuple[Tensor, LossBreakdown]:
    diff_x = x - x_hat
    l1 = mean_all(diff_x * diff_x)
    diff_f = f - f_hat
    l2 = mean_all(diff_f * diff_f)
    diff_a = a - a_hat
    l3 = mean_all(diff_a * diff_a)
    omega = mean_all(abs_(z))
    total = l1 + l2 + l3 + float(sparsity_weight) * omega
    breakdown = LossBreakdown(l1=float(l1.data), l2=float(l2.data), l3=float(l3.data),
                              omega=float(omega.data), total=float(total.data))
    return total, breakdown


def _output_loss(x: Tensor, out: ModelOutput, f: Tensor, a: Tensor,
                 sparsity_weight: float) -> tuple[Tensor, LossBreakdown]:
    return _loss_graph(x, out.reconstruction, f, out.freqs, a, out.amps,
                       out.spikes, sparsity_weight)


def compute_loss(x, x_hat, f, f_hat, a, a_hat, z, sparsity_weight: float) -> LossBreakdown:
    """Loss terms for already-computed outputs (no graph retained)."""
    _, breakdown = _loss_graph(Tensor(np.asarray(x)), Tensor(np.asarray(x_hat)),
                               Tensor(np.asarray(f)), Tensor(np.asarray(f_hat)),
                               Tensor(np.asarray(a)), Tensor(np.asarray(a_hat)),
                               Tensor(np.asarray(z)), sparsity_weight)
    return breakdown


@dataclass
class EpochRecord:
    epoch: int
    split: str
    loss: LossBreakdown


@dataclass
class TrainResult:
    model: SpikeCodec
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_total: float = float("inf")
    epochs_run: int = 0


def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def evaluate_split(model: SpikeCodec, windows: WindowSet, sparsity_weight: float,
                   batch_size: int = 256) -> LossBreakdown:
    """Mean loss over a partition with batchnorm in eval mode."""
    dtype = model.dtype
    sums = np.zeros(4)
    n = len(windows)
    with no_grad():
        for idx in _batches(n, batch_size, np.arange(n)):
            x = Tensor(windows.x[idx].astype(dtype))
            f = Tensor(windows.freqs[idx].astype(dtype))
            a = Tensor(windows.amps[idx].astype(dtype))
            out = model.forward(x, training=False)
            _, b = _output_loss(x, out, f, a, sparsity_weight)
            sums += np.array([b.l1, b.l2, b.l3, b.omega]) * len(idx)
    l1, l2, l3, omega = sums / n
    return LossBreakdown(l1, l2, l3, omega, l1 + l2 + l3 + sparsity_weight * omega)


def train(dataset: Dataset, cfg: TrainConfig) -> TrainResult:
    """Mini-batch Adam training with early stopping on validation loss."""
    dtype = cfg.dtype
    model = SpikeCodec(window_length=dataset.x.shape[2],
                       max_components=dataset.freqs.shape[1],
                       tau=cfg.spike_threshold, surrogate_slope=cfg.surrogate_slope,
                       conv_channels=cfg.conv_channels, snn_hidden=cfg.snn_hidden,
                       dtype=dtype, seed=cfg.seed)
    optimizer = Adam(model.parameters(), lr=cfg.learning_rate)
    shuffle_rng = np.random.default_rng([cfg.seed, 3])
    train_ws = dataset.train
    val_ws = dataset.val
    n = len(train_ws)
    result = TrainResult(model=model)
    best_state = None
    bad_epochs = 0

    for epoch in range(cfg.max_epochs):
        order = shuffle_rng.permutation(n)
        sums = np.zeros(4)
        for batch_index, idx in enumerate(_batches(n, cfg.batch_size, order)):
            x = Tensor(train_ws.x[idx].astype(dtype))
            f = Tensor(train_ws.freqs[idx].astype(dtype))
            a = Tensor(train_ws.amps[idx].astype(dtype))
            out = model.forward(x, training=True)
            total, b = _output_loss(x, out, f, a, cfg.sparsity_weight)
            if not np.isfinite(b.total):
                raise TrainingDivergedError(epoch, batch_index)
            total.backward()
            optimizer.step()
            optimizer.zero_grad()
            sums += np.array([b.l1, b.l2, b.l3, b.omega]) * len(idx)
        l1, l2, l3, omega = sums / n
        train_loss = LossBreakdown(l1, l2, l3, omega,
                                   l1 + l2 + l3 + cfg.sparsity_weight * omega)
        val_loss = evaluate_split(model, val_ws, cfg.sparsity_weight, cfg.batch_size)
        result.log.append(EpochRecord(epoch, "train", train_loss))
        result.log.append(EpochRecord(epoch, "val", val_loss))
        result.epochs_run = epoch + 1

        if val_loss.total < result.best_val_total:
            result.best_val_total = val_loss.total
            result.best_epoch = epoch
            best_state = model.snapshot()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > cfg.patience:
                break

    if best_state is not None:
        model.load_state(best_state)
    return result


LOG_COLUMNS = ["epoch", "split", "L1", "L2", "L3", "omega", "total"]


def write_training_log(log: list[EpochRecord], path: str | Path) -> None:
    """CSV log; floats are written with repr so identical runs are byte-identical."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for record in log:
            b = record.loss
            writer.writerow([record.epoch, record.split,
                             repr(b.l1), repr(b.l2), repr(b.l3),
                             repr(b.omega), repr(b.total)])
