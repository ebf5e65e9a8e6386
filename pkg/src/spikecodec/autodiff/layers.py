"""Network operators built on the tensor graph.

Convolutions run as one BLAS contraction per kernel tap, which keeps
memory flat (no im2col buffer) while staying deterministic for a fixed
thread count.  The spike nonlinearities carry the two surrogate rules
the model trains with: a hard-tanh straight-through estimator for the
ternary bottleneck and an arctangent surrogate for the firing threshold
of the leaky integrate-and-fire layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, _make


def _im2col(x: np.ndarray, taps: int, pad: int) -> np.ndarray:
    """Unfold (N, C, K) into (N*K, taps*C) sliding-window rows.

    Column j = r*C + c holds channel c at tap offset r, matching the
    flattened weight layout used by the conv GEMMs.
    """
    n, c, k = x.shape
    padded = np.zeros((n, k + 2 * pad, c), dtype=x.dtype)
    padded[:, pad:pad + k, :] = x.transpose(0, 2, 1)
    cols = np.empty((n, k, taps * c), dtype=x.dtype)
    for r in range(taps):
        cols[:, :, r * c:(r + 1) * c] = padded[:, r:r + k, :]
    return cols.reshape(n * k, taps * c)


def _col2im(gcols: np.ndarray, n: int, c: int, k: int, taps: int, pad: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add column gradients back."""
    acc = np.zeros((n, k + 2 * pad, c), dtype=gcols.dtype)
    g = gcols.reshape(n, k, taps, c)
    for r in range(taps):
        acc[:, r:r + k, :] += g[:, :, r, :]
    return np.ascontiguousarray(acc[:, pad:pad + k, :].transpose(0, 2, 1))


def _flatten_weight(w: np.ndarray) -> np.ndarray:
    # (C_out, C_in, R) -> (R*C_in, C_out) so rows match the im2col columns
    return np.ascontiguousarray(w.transpose(2, 1, 0)).reshape(-1, w.shape[0])


def _unflatten_weight(gw2: np.ndarray, c_out: int, c_in: int, taps: int) -> np.ndarray:
    return np.ascontiguousarray(gw2.reshape(taps, c_in, c_out).transpose(2, 1, 0))


def _conv_core(x: Tensor, w: Tensor, b: Tensor, w_eff: np.ndarray,
               grad_w_eff_to_w) -> Tensor:
    """Shared forward/backward of both conv flavors.

    ``w_eff`` is the (C_out, C_in, R) correlation kernel actually applied;
    ``grad_w_eff_to_w`` maps its gradient back onto ``w.data``'s layout.
    The im2col matrix is kept alive for the backward pass, trading memory
    for a single GEMM per gradient.
    """
    n, c_in, k = x.data.shape
    c_out, _, taps = w_eff.shape
    pad = (taps - 1) // 2
    cols = _im2col(x.data, taps, pad)                    # (N*K, R*C_in)
    w2 = _flatten_weight(w_eff)                          # (R*C_in, C_out)
    out2 = cols @ w2
    value = out2.reshape(n, k, c_out).transpose(0, 2, 1) + b.data[None, :, None]

    def backward(out: Tensor):
        def fn():
            g = out.grad
            if b.requires_grad:
                b.accumulate_grad(g.sum(axis=(0, 2)))
            g2 = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(n * k, c_out)
            if w.requires_grad:
                gw2 = cols.T @ g2
                w.accumulate_grad(grad_w_eff_to_w(_unflatten_weight(gw2, c_out, c_in, taps)))
            if x.requires_grad:
                gcols = g2 @ w2.T
                x.accumulate_grad(_col2im(gcols, n, c_in, k, taps, pad))
        return fn

    return _make(value, (x, w, b), backward)


def conv1d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Same-length 1D cross-correlation.

    x: (N, C_in, K), w: (C_out, C_in, R) with R odd, b: (C_out,).
    Zero padding of (R-1)//2 keeps the output length at K.
    """
    if x.data.ndim != 3 or w.data.ndim != 3:
        raise ValueError(f"conv1d expects 3D input/weights, got {x.shape} and {w.shape}")
    n, c_in, k = x.data.shape
    c_out, c_in_w, taps = w.data.shape
    if c_in != c_in_w or b.data.shape != (c_out,):
        raise ValueError(f"conv1d shape mismatch: x={x.shape} w={w.shape} b={b.shape}")
    if taps % 2 == 0:
        raise ValueError("conv1d kernel length must be odd")
    return _conv_core(x, w, b, w.data, lambda gw: gw)


def conv1d_transpose(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Adjoint of :func:`conv1d` (stride 1, same padding), so lengths are preserved.

    x: (N, C_in, K), w: (C_in, C_out, R), b: (C_out,).  Equivalent to a
    correlation with the tap-reversed, channel-transposed kernel.
    """
    if x.data.ndim != 3 or w.data.ndim != 3:
        raise ValueError(f"conv1d_transpose expects 3D input/weights, got {x.shape} and {w.shape}")
    n, c_in, k = x.data.shape
    c_in_w, c_out, taps = w.data.shape
    if c_in != c_in_w or b.data.shape != (c_out,):
        raise ValueError(f"conv1d_transpose shape mismatch: x={x.shape} w={w.shape} b={b.shape}")
    if taps % 2 == 0:
        raise ValueError("conv1d_transpose kernel length must be odd")
    w_eff = np.ascontiguousarray(w.data.transpose(1, 0, 2)[:, :, ::-1])

    def grad_back(gw_eff: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(gw_eff.transpose(1, 0, 2)[:, :, ::-1])

    return _conv_core(x, w, b, w_eff, grad_back)


@dataclass
class BatchNormState:
    """Running statistics, updated in training forward passes only."""

    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def initial(cls, channels: int, dtype=np.float64) -> "BatchNormState":
        return cls(mean=np.zeros(channels, dtype=dtype), var=np.ones(channels, dtype=dtype))

    def copy(self) -> "BatchNormState":
        return BatchNormState(self.mean.copy(), self.var.copy())


def batchnorm1d(x: Tensor, scale: Tensor, shift: Tensor, state: BatchNormState,
                training: bool, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization of an (N, C, K) tensor.

    Training mode normalizes with batch statistics over (N, K) and
    updates the running statistics; eval mode uses the running ones.
    """
    if x.data.ndim != 3:
        raise ValueError(f"batchnorm1d expects (N, C, K), got {x.shape}")
    if training:
        mu = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        count = x.data.shape[0] * x.data.shape[2]
        bessel = count / max(count - 1, 1)
        state.mean *= 1.0 - momentum
        state.mean += momentum * mu
        state.var *= 1.0 - momentum
        state.var += momentum * var * bessel
    else:
        mu = state.mean.astype(x.dtype, copy=False)
        var = state.var.astype(x.dtype, copy=False)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu[None, :, None]) * inv[None, :, None]
    value = scale.data[None, :, None] * xhat + shift.data[None, :, None]

    def backward(out: Tensor):
        def fn():
            g = out.grad
            if shift.requires_grad:
                shift.accumulate_grad(g.sum(axis=(0, 2)))
            if scale.requires_grad:
                scale.accumulate_grad((g * xhat).sum(axis=(0, 2)))
            if x.requires_grad:
                coeff = (scale.data * inv)[None, :, None]
                if training:
                    g_mean = g.mean(axis=(0, 2))[None, :, None]
                    gx_mean = (g * xhat).mean(axis=(0, 2))[None, :, None]
                    x.accumulate_grad(coeff * (g - g_mean - xhat * gx_mean))
                else:
                    x.accumulate_grad(coeff * g)
        return fn

    return _make(value, (x, scale, shift), backward)


def spike_threshold_ste(x: Tensor, tau: float) -> Tensor:
    """Ternary hard threshold: sign(x) where |x| >= tau, else 0.

    Backward substitutes the derivative of the hard hyperbolic tangent
    evaluated at the input (straight-through estimator), so gradients
    pass unchanged for |x| <= 1 and are blocked outside.
    """
    if tau <= 0:
        raise ValueError("spike threshold tau must be positive")
    value = np.where(np.abs(x.data) >= tau, np.sign(x.data), x.dtype.type(0))

    def backward(out: Tensor):
        def fn():
            if x.requires_grad:
                mask = (np.abs(x.data) <= 1.0).astype(x.dtype)
                x.accumulate_grad(out.grad * mask)
        return fn

    return _make(value, (x,), backward)


def fire_atan(v: Tensor, alpha: float) -> Tensor:
    """Heaviside firing (1 where v >= 0) with an arctangent surrogate.

    The backward pass uses g(v) = 1 / (1 + (alpha * v)^2) in place of
    the (zero almost everywhere) true derivative.
    """
    value = (v.data >= 0).astype(v.dtype)

    def backward(out: Tensor):
        def fn():
            if v.requires_grad:
                av = alpha * v.data
                v.accumulate_grad(out.grad / (1.0 + av * av))
        return fn

    return _make(value, (v,), backward)


def lif_step(u_prev: Tensor, s_prev: Tensor, s_in: Tensor, w: Tensor,
             beta: Tensor, theta: Tensor, alpha: float = 2.0) -> tuple[Tensor, Tensor]:
    """One step of a spiking leaky integrate-and-fire layer.

    u = beta * u_prev + s_in @ w.T - theta * s_prev (reset by subtraction
    of the previous spike), s = 1 where u >= theta.  The firing threshold
    uses the arctangent surrogate in the backward pass; all other paths
    carry exact gradients.
    """
    from .tensor import linear, mul, sub, add

    u = sub(add(mul(beta, u_prev), linear(s_in, w)), mul(theta, s_prev))
    s = fire_atan(sub(u, theta), alpha)
    return u, s


def leaky_integrator_step(u_prev: Tensor, s_in: Tensor, w: Tensor, beta: Tensor) -> Tensor:
    """Non-spiking LIF variant used by the readout heads: no firing, no reset."""
    from .tensor import linear, mul, add

    return add(mul(beta, u_prev), linear(s_in, w))
