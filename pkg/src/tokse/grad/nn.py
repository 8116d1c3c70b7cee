"""Thin parameter-holding layers over the op set.

Every layer takes an rng at construction so model init is a pure function of
the seed, and exposes named_params() for the optimizer and checkpoints.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Tensor


class Layer:
    def named_params(self):
        out = []
        for attr, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                out.append((attr, val))
            elif isinstance(val, Layer):
                out.extend((f"{attr}.{n}", t) for n, t in val.named_params())
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Layer):
                        out.extend((f"{attr}.{i}.{n}", t) for n, t in item.named_params())
        return out

    def param_count(self) -> int:
        return sum(t.size for _, t in self.named_params())

    def state_arrays(self) -> dict:
        return {name: t.data for name, t in self.named_params()}

    def astype(self, dtype):
        """Cast parameters in place; float64 makes whole-model runs double."""
        for _, t in self.named_params():
            t.data = t.data.astype(dtype)
        return self

    def load_state_arrays(self, arrays: dict, prefix: str = ""):
        for name, t in self.named_params():
            key = prefix + name
            if key not in arrays:
                raise KeyError(f"checkpoint missing parameter {key}")
            arr = arrays[key]
            if arr.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {key}: {arr.shape} vs {t.data.shape}")
            t.data = arr.astype(t.data.dtype, copy=True)


class Linear(Layer):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int,
                 scale: float | None = None, bias: bool = True):
        scale = (1.0 / d_in) ** 0.5 if scale is None else scale
        self.w = Tensor(rng.normal(0.0, scale, (d_in, d_out)).astype(np.float32), requires_grad=True)
        self.b = Tensor(np.zeros(d_out, dtype=np.float32), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.w
        return out if self.b is None else out + self.b


class Conv1d(Layer):
    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int, kernel: int,
                 stride: int = 1, padding: int = 0):
        scale = (1.0 / (c_in * kernel)) ** 0.5
        self.w = Tensor(rng.normal(0.0, scale, (c_out, c_in, kernel)).astype(np.float32),
                        requires_grad=True)
        self.b = Tensor(np.zeros(c_out, dtype=np.float32), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.w, self.b, stride=self.stride, padding=self.padding)


class ConvTranspose1d(Layer):
    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int, kernel: int,
                 stride: int = 1, padding: int = 0):
        scale = (1.0 / (c_in * kernel)) ** 0.5
        self.w = Tensor(rng.normal(0.0, scale, (c_in, c_out, kernel)).astype(np.float32),
                        requires_grad=True)
        self.b = Tensor(np.zeros(c_out, dtype=np.float32), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv1d_transpose(x, self.w, self.b, stride=self.stride, padding=self.padding)


class LayerNorm(Layer):
    def __init__(self, dim: int):
        self.gain = Tensor(np.ones(dim, dtype=np.float32), requires_grad=True)
        self.shift = Tensor(np.zeros(dim, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.shift)


class Embedding(Layer):
    def __init__(self, rng: np.random.Generator, n_rows: int, dim: int, scale: float = 0.02):
        self.weight = Tensor(rng.normal(0.0, scale, (n_rows, dim)).astype(np.float32),
                             requires_grad=True)

    def __call__(self, ids: np.ndarray) -> Tensor:
        return ops.embedding(self.weight, ids)
