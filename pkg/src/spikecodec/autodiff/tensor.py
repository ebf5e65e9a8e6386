"""Reverse-mode automatic differentiation over dense numpy arrays.

The engine is deliberately small: it supports exactly the operations the
spike-coding network needs and nothing more.  Graphs are built eagerly;
calling :meth:`Tensor.backward` on a scalar walks the graph once in
reverse topological order.  Gradients accumulate additively, so a tensor
consumed by several downstream operations receives the sum of all
contributions.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph construction inside the block (inference only)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    """A dense real array participating in a reverse-mode graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, value: np.ndarray) -> None:
        if self.grad is None:
            # copy: the incoming buffer may be owned by another node
            self.grad = np.array(np.broadcast_to(value, self.data.shape))
        else:
            self.grad += value

    def backward(self) -> None:
        """Backpropagate from a scalar root through the whole graph."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar root tensor")
        ordered: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                ordered.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(ordered):
            if node._backward_fn is not None:
                node._backward_fn()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)


def _wrap(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _make(data: np.ndarray, parents: Sequence[Tensor], backward: Callable[[Tensor], Callable[[], None]]) -> Tensor:
    """Build a graph node; prunes the graph when gradients are off."""
    requires = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires)
    if requires:
        out._parents = tuple(parents)
        out._backward_fn = backward(out)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b) -> Tensor:
    a = _wrap(a, getattr(b, "dtype", None)) if not isinstance(a, Tensor) else a
    b = _wrap(b, a.dtype)

    def backward(out: Tensor):
        def fn():
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(out.grad, a.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(out.grad, b.shape))
        return fn

    return _make(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b) -> Tensor:
    b = _wrap(b, a.dtype)

    def backward(out: Tensor):
        def fn():
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(out.grad, a.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(-out.grad, b.shape))
        return fn

    return _make(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    b = _wrap(b, a.dtype)

    def backward(out: Tensor):
        def fn():
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(out.grad * b.data, a.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(out.grad * a.data, b.shape))
        return fn

    return _make(a.data * b.data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    def backward(out: Tensor):
        def fn():
            if a.requires_grad:
                a.accumulate_grad(-out.grad)
        return fn

    return _make(-a.data, (a,), backward)


def linear(x: Tensor, w: Tensor) -> Tensor:
    """Dense map ``x @ w.T`` with x of shape (N, in) and w of shape (out, in)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"linear shapes incompatible: {x.shape} vs {w.shape}")

    def backward(out: Tensor):
        def fn():
            if x.requires_grad:
                x.accumulate_grad(out.grad @ w.data)
            if w.requires_grad:
                w.accumulate_grad(out.grad.T @ x.data)
        return fn

    return _make(x.data @ w.data.T, (x, w), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(out: Tensor):
        def fn():
            if x.requires_grad:
                x.accumulate_grad(np.broadcast_to(out.grad, x.shape).astype(x.dtype, copy=False))
        return fn

    return _make(np.asarray(x.data.sum()), (x,), backward)


def mean_all(x: Tensor) -> Tensor:
    inv = 1.0 / x.data.size

    def backward(out: Tensor):
        def fn():
            if x.requires_grad:
                if x.grad is None:
                    x.grad = np.zeros_like(x.data)
                x.grad += out.grad * x.data.dtype.type(inv)
        return fn

    return _make(np.asarray(x.data.mean()), (x,), backward)


def abs_(x: Tensor) -> Tensor:
    """Elementwise absolute value; subgradient 0 at the origin."""
    def backward(out: Tensor):
        def fn():
            if x.requires_grad:
                x.accumulate_grad(out.grad * np.sign(x.data))
        return fn

    return _make(np.abs(x.data), (x,), backward)


def tanh(x: Tensor) -> Tensor:
    value = np.tanh(x.data)

    def backward(out: Tensor):
        def fn():
            if x.requires_grad:
                x.accumulate_grad(out.grad * (1.0 - value * value))
        return fn

    return _make(value, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    value = 1.0 / (1.0 + np.exp(-x.data))

    def backward(out: Tensor):
        def fn():
            if x.requires_grad:
                x.accumulate_grad(out.grad * value * (1.0 - value))
        return fn

    return _make(value, (x,), backward)


def hard_tanh(x: Tensor) -> Tensor:
    """Clamp to [-1, 1]; derivative 1 inside the interval, 0 outside."""
    def backward(out: Tensor):
        def fn():
            if x.requires_grad:
                mask = (np.abs(x.data) <= 1.0).astype(x.dtype)
                x.accumulate_grad(out.grad * mask)
        return fn

    return _make(np.clip(x.data, -1.0, 1.0), (x,), backward)


def timestep(x: Tensor, k: int) -> Tensor:
    """Slice out step ``k`` along the last axis: (..., K) -> (...,)."""
    def backward(out: Tensor):
        def fn():
            if x.requires_grad:
                if x.grad is None:
                    x.grad = np.zeros_like(x.data)
                x.grad[..., k] += out.grad
        return fn

    return _make(x.data[..., k].copy(), (x,), backward)
