"""Adam with decoupled weight decay and a warmup/inverse-sqrt schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TrainingDiverged(RuntimeError):
    """A loss went non-finite; the run stops rather than writing garbage."""


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    warmup_steps: int = 100

    def __post_init__(self):
        if self.lr <= 0 or self.warmup_steps < 1:
            raise ValueError("lr must be positive and warmup_steps >= 1")


def lr_at_step(cfg: OptimConfig, step: int) -> float:
    """Linear ramp to cfg.lr at warmup_steps, then decay as 1/sqrt(step)."""
    if step < 1:
        raise ValueError(f"steps are 1-based, got {step}")
    return cfg.lr * min(step / cfg.warmup_steps, (cfg.warmup_steps / step) ** 0.5)


class AdamW:
    """Holds per-parameter moment state; params is a list of (name, Tensor).

    Weight decay applies only to parameters whose name carries a ".w" or
    ".weight" suffix component; gains, shifts, and biases decay toward their
    init values under naive decay, which hurts small models.
    """

    def __init__(self, named_params, cfg: OptimConfig):
        self.cfg = cfg
        self.named_params = list(named_params)
        names = [n for n, _ in self.named_params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        self.step_count = 0
        self._m = [np.zeros_like(t.data) for _, t in self.named_params]
        self._v = [np.zeros_like(t.data) for _, t in self.named_params]

    def zero_grad(self):
        for _, t in self.named_params:
            t.zero_grad()

    def step(self):
        self.step_count += 1
        lr = lr_at_step(self.cfg, self.step_count)
        b1, b2 = self.cfg.beta1, self.cfg.beta2
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for (name, t), m, v in zip(self.named_params, self._m, self._v):
            if t.grad is None:
                continue
            g = t.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.cfg.eps)
            if self.cfg.weight_decay and _decays(name):
                update = update + self.cfg.weight_decay * t.data
            t.data -= (lr * update).astype(t.data.dtype, copy=False)

    def state_arrays(self) -> dict:
        """Moment state keyed for checkpointing."""
        out = {"optim/step": np.array([self.step_count], dtype=np.int64)}
        for (name, _), m, v in zip(self.named_params, self._m, self._v):
            out[f"optim/m/{name}"] = m
            out[f"optim/v/{name}"] = v
        return out

    def load_state_arrays(self, arrays: dict):
        self.step_count = int(arrays["optim/step"][0])
        for i, (name, t) in enumerate(self.named_params):
            m = arrays[f"optim/m/{name}"]
            v = arrays[f"optim/v/{name}"]
            if m.shape != t.data.shape or v.shape != t.data.shape:
                raise ValueError(f"optimizer state shape mismatch for {name}")
            self._m[i] = m.astype(t.data.dtype, copy=True)
            self._v[i] = v.astype(t.data.dtype, copy=True)


def _decays(name: str) -> bool:
    leaf = name.rsplit(".", 1)[-1]
    return leaf in ("w", "weight")
