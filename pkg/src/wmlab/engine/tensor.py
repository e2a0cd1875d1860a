"""Minimal reverse-mode autodiff over float32 numpy arrays.

The op set is exactly what the codec and the diffusion trunk need: add, mul,
matmul, conv2d, nearest_upsample, silu, layer_scale_shift, and mse.  Each op
records a node on an implicit tape; ``backward`` walks the tape once and
accumulates gradients into leaf tensors, then frees the graph.

Everything is float32 and deterministic: identical inputs produce
bit-identical outputs and gradients.  Scalar reductions accumulate in
float64 before rounding back to float32.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from ..errors import ConfigError, UsageError
from . import kernels


class Tensor:
    """A float32 array plus an optional gradient and graph linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim and not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, requires_grad={self.requires_grad})"


def _needs_grad(t: Tensor) -> bool:
    return t.requires_grad or t._backward is not None


def _node(data: np.ndarray, parents: tuple, backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if any(_needs_grad(p) for p in parents):
        out._parents = parents
        out._backward = backward
    return out


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not _needs_grad(t):
        return
    if t.grad is None:
        t.grad = grad.astype(np.float32, copy=True)
    else:
        t.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad over axes that were broadcast to reach ``grad.shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.astype(np.float32, copy=False)


def _check_broadcast(kind: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ConfigError(f"{kind}: shapes {a.shape} and {b.shape} do not conform") from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)
    data = a.data + b.data

    def backward(g: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _node(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("mul", a, b)
    data = a.data * b.data

    def backward(g: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _node(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ConfigError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    data = a.data @ b.data

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _node(data, (a, b), backward)


def conv2d(x: Tensor, w: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ConfigError(f"conv2d: need NCHW input and OIHW weight, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ConfigError(f"conv2d: input channels {x.shape[1]} != weight channels {w.shape[1]}")
    if kernels.conv_out_size(x.shape[2], w.shape[2], stride, pad) <= 0:
        raise ConfigError(f"conv2d: kernel {w.shape} too large for input {x.shape} (pad={pad})")
    x_shape, w_shape = x.shape, w.shape
    data = kernels.conv2d_forward(x.data, w.data, stride, pad)

    def backward(g: np.ndarray) -> None:
        if _needs_grad(x):
            _accumulate(x, kernels.conv2d_backward_input(g, w.data, x_shape, stride, pad))
        if _needs_grad(w):
            _accumulate(w, kernels.conv2d_backward_weight(g, x.data, w_shape, stride, pad))

    return _node(data, (x, w), backward)


def nearest_upsample(x: Tensor, factor: int) -> Tensor:
    if x.data.ndim != 4:
        raise ConfigError(f"nearest_upsample: need NCHW input, got {x.shape}")
    if factor < 1:
        raise ConfigError(f"nearest_upsample: factor must be >= 1, got {factor}")
    data = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def backward(g: np.ndarray) -> None:
        n, c, h, w = x.shape
        gsum = g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5))
        _accumulate(x, gsum.astype(np.float32, copy=False))

    return _node(data, (x,), backward)


def silu(x: Tensor) -> Tensor:
    sig = 1.0 / (1.0 + np.exp(-x.data))
    data = x.data * sig

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * sig * (1.0 + x.data * (1.0 - sig)))

    return _node(data, (x,), backward)


def layer_scale_shift(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    """AdaLN-style modulation: x * (1 + scale) + shift.

    x is NCHW; scale and shift are (N, C) and broadcast over the spatial
    axes.  This is the conditioning injection point for timestep and action
    embeddings.
    """
    if x.data.ndim != 4 or scale.shape != shift.shape:
        raise ConfigError(
            f"layer_scale_shift: shapes {x.shape}, {scale.shape}, {shift.shape} do not conform"
        )
    if scale.shape != (x.shape[0], x.shape[1]):
        raise ConfigError(
            f"layer_scale_shift: modulation {scale.shape} does not match x {x.shape}"
        )
    s4 = scale.data[:, :, None, None]
    data = x.data * (1.0 + s4) + shift.data[:, :, None, None]

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * (1.0 + s4))
        _accumulate(scale, (g * x.data).sum(axis=(2, 3)))
        _accumulate(shift, g.sum(axis=(2, 3)))

    return _node(data, (x, scale, shift), backward)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ConfigError(f"mse: shapes {pred.shape} and {target.shape} do not conform")
    diff = pred.data.astype(np.float64) - target.data.astype(np.float64)
    n = diff.size
    data = np.float32(np.mean(diff * diff))

    def backward(g: np.ndarray) -> None:
        scale = np.float32(2.0 / n) * np.float32(g)
        d32 = (pred.data - target.data) * scale
        _accumulate(pred, d32)
        _accumulate(target, -d32)

    return _node(np.asarray(data), (pred, target), backward)


OPS = {
    "add": add,
    "mul": mul,
    "matmul": matmul,
    "conv2d": conv2d,
    "nearest_upsample": nearest_upsample,
    "silu": silu,
    "layer_scale_shift": layer_scale_shift,
    "mse": mse,
}


def apply_op(kind: str, *inputs, **kwargs) -> Tensor:
    """Dispatch an op by kind name. Unknown kinds are a configuration error."""
    if kind not in OPS:
        raise ConfigError(f"unknown op kind {kind!r}; valid kinds: {sorted(OPS)}")
    return OPS[kind](*inputs, **kwargs)


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss; frees the graph afterwards.

    Gradients accumulate into ``.grad`` of every reachable tensor that has
    ``requires_grad`` or contributes to one.  Tensors not reachable from the
    loss keep ``grad is None`` (read as a zero gradient).
    """
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise UsageError(f"backward: loss must be scalar, got shape {loss.shape}")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in order:
        node._parents = ()
        node._backward = None
