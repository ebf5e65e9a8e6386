"""The learned spike codec: conv encoder, ternary bottleneck, transposed-conv
decoder, and a two-headed spiking regressor for frequencies and amplitudes.

Shapes are fixed by construction: a (2, K) window in [0, 1] maps to a
(2, K) feature tensor, a ternary (2, K) spike train, a (2, K)
reconstruction in (0, 1), and two ``max_components``-long vectors in
(0, 1).  Checkpoints serialize every named array (parameters plus batch
norm running statistics) as a little-endian float32 blob behind a JSON
manifest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import (
    Adam,  # noqa: F401  (re-exported for training convenience)
    BatchNormState,
    Tensor,
    batchnorm1d,
    conv1d,
    conv1d_transpose,
    leaky_integrator_step,
    lif_step,
    sigmoid,
    spike_threshold_ste,
    tanh,
)

CHECKPOINT_MAGIC = b"SPKCODEC"
CHECKPOINT_VERSION = 1

BETA_INIT = 0.9
THETA_INIT = 1.0


class _Conv1d:
    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 rng: np.random.Generator, dtype, transposed: bool = False):
        bound = np.sqrt(1.0 / (in_channels * kernel))
        shape = (in_channels, out_channels, kernel) if transposed else (out_channels, in_channels, kernel)
        self.weight = Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)
        self.transposed = transposed

    def __call__(self, x: Tensor) -> Tensor:
        if self.transposed:
            return conv1d_transpose(x, self.weight, self.bias)
        return conv1d(x, self.weight, self.bias)

    def arrays(self):
        return [("weight", self.weight), ("bias", self.bias)]


class _BatchNorm1d:
    def __init__(self, channels: int, dtype):
        self.scale = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.shift = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.state = BatchNormState.initial(channels, dtype=dtype)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return batchnorm1d(x, self.scale, self.shift, self.state, training)

    def arrays(self):
        return [("scale", self.scale), ("shift", self.shift)]

    def buffers(self):
        return [("running_mean", self.state.mean), ("running_var", self.state.var)]


class _LifLayer:
    """One LIF layer: weights plus learnable decay and firing threshold."""

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, dtype, spiking: bool = True):
        bound = np.sqrt(1.0 / in_features)
        self.weight = Tensor(rng.uniform(-bound, bound, size=(out_features, in_features)).astype(dtype),
                             requires_grad=True)
        self.beta = Tensor(np.full(out_features, BETA_INIT, dtype=dtype), requires_grad=True)
        self.theta = Tensor(np.full(out_features, THETA_INIT, dtype=dtype), requires_grad=True)
        self.out_features = out_features
        self.spiking = spiking

    def arrays(self):
        return [("weight", self.weight), ("beta", self.beta), ("theta", self.theta)]


class Encoder:
    """Three same-length conv layers (2 -> C -> C -> 2); batchnorm + tanh on
    the hidden layers, no activation on the last."""

    def __init__(self, channels: int, kernel: int, rng: np.random.Generator, dtype):
        self.conv1 = _Conv1d(2, channels, kernel, rng, dtype)
        self.bn1 = _BatchNorm1d(channels, dtype)
        self.conv2 = _Conv1d(channels, channels, kernel, rng, dtype)
        self.bn2 = _BatchNorm1d(channels, dtype)
        self.conv3 = _Conv1d(channels, 2, kernel, rng, dtype)

    def forward(self, x: Tensor, training: bool) -> Tensor:
        h = tanh(self.bn1(self.conv1(x), training))
        h = tanh(self.bn2(self.conv2(h), training))
        return self.conv3(h)

    def named_arrays(self, prefix: str):
        out = []
        for name, layer in (("conv1", self.conv1), ("conv2", self.conv2), ("conv3", self.conv3)):
            out += [(f"{prefix}.{name}.{n}", t, "param") for n, t in layer.arrays()]
        for name, layer in (("bn1", self.bn1), ("bn2", self.bn2)):
            out += [(f"{prefix}.{name}.{n}", t, "param") for n, t in layer.arrays()]
            out += [(f"{prefix}.{name}.{n}", a, "buffer") for n, a in layer.buffers()]
        return out


class Decoder:
    """Mirror of the encoder with transposed convolutions and a sigmoid output."""

    def __init__(self, channels: int, kernel: int, rng: np.random.Generator, dtype):
        self.conv1 = _Conv1d(2, channels, kernel, rng, dtype, transposed=True)
        self.bn1 = _BatchNorm1d(channels, dtype)
        self.conv2 = _Conv1d(channels, channels, kernel, rng, dtype, transposed=True)
        self.bn2 = _BatchNorm1d(channels, dtype)
        self.conv3 = _Conv1d(channels, 2, kernel, rng, dtype, transposed=True)

    def forward(self, z: Tensor, training: bool) -> Tensor:
        h = tanh(self.bn1(self.conv1(z), training))
        h = tanh(self.bn2(self.conv2(h), training))
        return sigmoid(self.conv3(h))

    named_arrays = Encoder.named_arrays


class SpikingRegressor:
    """Two spiking LIF layers feeding two parallel integrate-only heads.

    The spike train is consumed as a K-step sequence of 2-vectors; the
    readout is the sigmoid of each head's membrane potential at the
    final step.
    """

    def __init__(self, hidden: tuple[int, int], outputs: int,
                 rng: np.random.Generator, dtype, surrogate_slope: float):
        self.lif1 = _LifLayer(2, hidden[0], rng, dtype)
        self.lif2 = _LifLayer(hidden[0], hidden[1], rng, dtype)
        self.head_freq = _LifLayer(hidden[1], outputs, rng, dtype, spiking=False)
        self.head_amp = _LifLayer(hidden[1], outputs, rng, dtype, spiking=False)
        self.surrogate_slope = surrogate_slope
        self.dtype = dtype

    def forward(self, z: Tensor) -> tuple[Tensor, Tensor]:
        from .autodiff import timestep

        n = z.shape[0]
        steps = z.shape[2]
        zeros = lambda w: Tensor(np.zeros((n, w), dtype=self.dtype))
        u1, s1 = zeros(self.lif1.out_features), zeros(self.lif1.out_features)
        u2, s2 = zeros(self.lif2.out_features), zeros(self.lif2.out_features)
        uf = zeros(self.head_freq.out_features)
        ua = zeros(self.head_amp.out_features)
        for k in range(steps):
            zk = timestep(z, k)
            u1, s1 = lif_step(u1, s1, zk, self.lif1.weight, self.lif1.beta,
                              self.lif1.theta, self.surrogate_slope)
            u2, s2 = lif_step(u2, s2, s1, self.lif2.weight, self.lif2.beta,
                              self.lif2.theta, self.surrogate_slope)
            uf = leaky_integrator_step(uf, s2, self.head_freq.weight, self.head_freq.beta)
            ua = leaky_integrator_step(ua, s2, self.head_amp.weight, self.head_amp.beta)
        return sigmoid(uf), sigmoid(ua)

    def named_arrays(self, prefix: str):
        out = []
        for name, layer in (("lif1", self.lif1), ("lif2", self.lif2),
                            ("head_freq", self.head_freq), ("head_amp", self.head_amp)):
            out += [(f"{prefix}.{name}.{n}", t, "param") for n, t in layer.arrays()]
        return out


@dataclass
class ModelOutput:
    features: Tensor       # encoder output Y, (N, 2, K)
    spikes: Tensor         # ternary Z, (N, 2, K)
    reconstruction: Tensor  # (N, 2, K) in (0, 1)
    freqs: Tensor          # (N, M) in (0, 1)
    amps: Tensor           # (N, M) in (0, 1)


class SpikeCodec:
    """Full network; owns every parameter and the batchnorm statistics."""

    def __init__(self, window_length: int = 64, max_components: int = 5,
                 tau: float = 0.1, surrogate_slope: float = 2.0,
                 conv_channels: int = 128, kernel: int = 7,
                 snn_hidden: tuple[int, int] = (128, 64),
                 dtype=np.float32, seed: int = 0):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.window_length = window_length
        self.max_components = max_components
        self.tau = float(tau)
        self.surrogate_slope = float(surrogate_slope)
        self.conv_channels = conv_channels
        self.kernel = kernel
        self.snn_hidden = tuple(snn_hidden)
        self.dtype = np.dtype(dtype)
        self.seed = seed
        rng = np.random.default_rng([seed, 2])
        self.encoder = Encoder(conv_channels, kernel, rng, self.dtype)
        self.decoder = Decoder(conv_channels, kernel, rng, self.dtype)
        self.snn = SpikingRegressor(self.snn_hidden, max_components, rng,
                                    self.dtype, self.surrogate_slope)

    # -- forward passes ------------------------------------------------

    def encode(self, x: Tensor, training: bool = False) -> Tensor:
        return self.encoder.forward(x, training)

    def spike_encode(self, y: Tensor) -> Tensor:
        return spike_threshold_ste(y, self.tau)

    def decode(self, z: Tensor, training: bool = False) -> Tensor:
        return self.decoder.forward(z, training)

    def regress(self, z: Tensor) -> tuple[Tensor, Tensor]:
        return self.snn.forward(z)

    def forward(self, x, training: bool = False) -> ModelOutput:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        y = self.encode(x, training)
        z = self.spike_encode(y)
        x_hat = self.decode(z, training)
        f_hat, a_hat = self.regress(z)
        return ModelOutput(y, z, x_hat, f_hat, a_hat)

    # -- parameter plumbing ---------------------------------------------

    def named_arrays(self) -> list[tuple[str, object, str]]:
        """(name, tensor-or-array, kind) for every param and buffer, in a
        stable order that also defines the checkpoint blob layout."""
        return (self.encoder.named_arrays("encoder")
                + self.decoder.named_arrays("decoder")
                + self.snn.named_arrays("snn"))

    def parameters(self) -> list[Tensor]:
        return [t for _, t, kind in self.named_arrays() if kind == "param"]

    def param_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def param_counts_by_block(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for name, t, kind in self.named_arrays():
            if kind != "param":
                continue
            block = name.split(".", 1)[0]
            counts[block] = counts.get(block, 0) + t.data.size
        return counts

    def snapshot(self) -> dict[str, np.ndarray]:
        out = {}
        for name, obj, kind in self.named_arrays():
            arr = obj.data if kind == "param" else obj
            out[name] = arr.copy()
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, obj, kind in self.named_arrays():
            target = obj.data if kind == "param" else obj
            source = state[name]
            if target.shape != source.shape:
                raise ValueError(f"shape mismatch for {name}: {target.shape} vs {source.shape}")
            target[...] = source

    def hyperparameters(self) -> dict:
        return {
            "window_length": self.window_length,
            "max_components": self.max_components,
            "tau": self.tau,
            "surrogate_slope": self.surrogate_slope,
            "conv_channels": self.conv_channels,
            "kernel": self.kernel,
            "snn_hidden": list(self.snn_hidden),
            "seed": self.seed,
        }


# -- checkpoint io -------------------------------------------------------


class CheckpointError(RuntimeError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


def save_checkpoint(model: SpikeCodec, path: str | Path, metadata: dict | None = None) -> Path:
    """Single-file checkpoint: magic, manifest length, JSON manifest, f32 blob."""
    path = Path(path)
    entries = []
    blobs = []
    for name, obj, kind in model.named_arrays():
        arr = obj.data if kind == "param" else obj
        entries.append({"name": name, "shape": list(arr.shape), "kind": kind})
        blobs.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    manifest = {
        "version": CHECKPOINT_VERSION,
        "hyperparameters": model.hyperparameters(),
        "arrays": entries,
        "metadata": metadata or {},
    }
    payload = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for blob in blobs:
            fh.write(blob)
    return path


def load_checkpoint(path: str | Path, dtype=np.float32) -> tuple[SpikeCodec, dict]:
    """Rebuild a model from a checkpoint; returns (model, metadata)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(CHECKPOINT_MAGIC) + 8 or raw[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointCorruptError(f"{path} is not a spikecodec checkpoint")
    offset = len(CHECKPOINT_MAGIC)
    (manifest_len,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    if offset + manifest_len > len(raw):
        raise CheckpointCorruptError(f"{path}: manifest extends past end of file")
    try:
        manifest = json.loads(raw[offset:offset + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"{path}: unreadable manifest") from exc
    offset += manifest_len
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: version {manifest.get('version')!r}, expected {CHECKPOINT_VERSION}")

    expected_floats = sum(int(np.prod(e["shape"])) for e in manifest["arrays"])
    blob = raw[offset:]
    if len(blob) != expected_floats * 4:
        raise CheckpointCorruptError(
            f"{path}: blob holds {len(blob)} bytes, manifest expects {expected_floats * 4}")
    values = np.frombuffer(blob, dtype="<f4")

    hp = manifest["hyperparameters"]
    model = SpikeCodec(window_length=hp["window_length"], max_components=hp["max_components"],
                       tau=hp["tau"], surrogate_slope=hp["surrogate_slope"],
                       conv_channels=hp["conv_channels"], kernel=hp["kernel"],
                       snn_hidden=tuple(hp["snn_hidden"]), dtype=dtype, seed=hp.get("seed", 0))
    state = {}
    cursor = 0
    for entry in manifest["arrays"]:
        count = int(np.prod(entry["shape"]))
        state[entry["name"]] = values[cursor:cursor + count].reshape(entry["shape"]).astype(dtype)
        cursor += count
    try:
        model.load_state(state)
    except (KeyError, ValueError) as exc:
        raise CheckpointCorruptError(f"{path}: manifest disagrees with model layout") from exc
    return model, manifest["metadata"]
