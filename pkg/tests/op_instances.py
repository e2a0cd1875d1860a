"""Random instance builders for every engine op kind.

Each builder returns (arrays, build_graph) where arrays are the inputs to
differentiate and build_graph maps the corresponding Tensors to a scalar
loss.  Non-scalar op outputs are reduced through mse against a fixed random
target so the finite-difference oracle sees a well-conditioned scalar.
"""

from __future__ import annotations

import numpy as np

from wmlab.engine import Tensor, apply_op, mse

OP_KINDS = ["add", "mul", "matmul", "conv2d", "nearest_upsample", "silu", "layer_scale_shift", "mse"]


def _reduce(out, target):
    return mse(out, Tensor(target))


def make_instance(kind: str, rng: np.random.Generator):
    def u(*shape):
        return rng.uniform(-1.0, 1.0, size=shape).astype(np.float32)

    if kind in ("add", "mul"):
        shape = (2, 3, 4)
        a, b = u(*shape), u(*shape)
        target = u(*shape)
        return [a, b], lambda ts: _reduce(apply_op(kind, ts[0], ts[1]), target)
    if kind == "matmul":
        a, b = u(3, 4), u(4, 2)
        target = u(3, 2)
        return [a, b], lambda ts: _reduce(apply_op(kind, ts[0], ts[1]), target)
    if kind == "conv2d":
        stride = int(rng.integers(1, 3))
        pad = int(rng.integers(0, 2))
        x = u(2, 2, 5, 5)
        w = u(3, 2, 3, 3)
        oh = (5 + 2 * pad - 3) // stride + 1
        target = u(2, 3, oh, oh)
        return [x, w], lambda ts: _reduce(apply_op(kind, ts[0], ts[1], stride=stride, pad=pad), target)
    if kind == "nearest_upsample":
        x = u(2, 3, 3, 3)
        target = u(2, 3, 6, 6)
        return [x], lambda ts: _reduce(apply_op(kind, ts[0], factor=2), target)
    if kind == "silu":
        x = u(2, 3, 4)
        target = u(2, 3, 4)
        return [x], lambda ts: _reduce(apply_op(kind, ts[0]), target)
    if kind == "layer_scale_shift":
        x = u(2, 3, 4, 4)
        scale = u(2, 3)
        shift = u(2, 3)
        target = u(2, 3, 4, 4)
        return [x, scale, shift], lambda ts: _reduce(apply_op(kind, ts[0], ts[1], ts[2]), target)
    if kind == "mse":
        a, b = u(3, 5), u(3, 5)
        return [a, b], lambda ts: apply_op(kind, ts[0], ts[1])
    raise ValueError(kind)
