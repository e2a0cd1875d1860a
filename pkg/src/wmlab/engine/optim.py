"""Parameter store and Adam updates.

A ParamStore owns named float32 parameter tensors plus their Adam moments
and the shared step counter, which is all the state a training run needs to
checkpoint.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, TrainingDiverged
from .tensor import Tensor


class ParamStore:
    """Named parameters with per-parameter Adam moments and a step counter."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, data) -> Tensor:
        if name in self.params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True, name=name)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None

    def names(self) -> list[str]:
        return sorted(self.params)

    def n_values(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def equals(self, other: "ParamStore") -> bool:
        """Bit-exact equality of parameters, moments, and step counter."""
        if self.step != other.step or self.names() != other.names():
            return False
        for name in self.params:
            if not (
                np.array_equal(self.params[name].data, other.params[name].data)
                and np.array_equal(self.m[name], other.m[name])
                and np.array_equal(self.v[name], other.v[name])
            ):
                return False
        return True


def adam_step(
    store: ParamStore,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Standard bias-corrected Adam over every parameter in the store.

    Parameters whose gradient is None are treated as zero-gradient (their
    moments still decay).  Non-finite gradients abort with the parameter
    named, since continuing would silently poison the run.
    """
    store.step += 1
    t = store.step
    c1 = np.float32(1.0 - beta1**t)
    c2 = np.float32(1.0 - beta2**t)
    b1 = np.float32(beta1)
    b2 = np.float32(beta2)
    lr32 = np.float32(lr)
    eps32 = np.float32(eps)
    for name, p in store.params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        elif not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"non-finite gradient in parameter {name!r} at step {t}")
        m = store.m[name]
        v = store.v[name]
        m *= b1
        m += (np.float32(1.0) - b1) * g
        v *= b2
        v += (np.float32(1.0) - b2) * (g * g)
        mhat = m / c1
        vhat = v / c2
        p.data -= lr32 * mhat / (np.sqrt(vhat) + eps32)
