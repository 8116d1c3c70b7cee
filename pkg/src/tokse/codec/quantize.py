"""Stage-specific quantizer bottlenecks with a shared interface.

Both stages expose ids in a single flat space so the codec API stays uniform:
the two-book stage packs its index pair as a*C2 + b, the merged stage uses
codebook rows directly.
"""

from __future__ import annotations

import numpy as np

from ..vq import Codebook, GroupQuantizer, group_quantize, quantize_nearest, update_ema

STAGE_GROUP = "group"
STAGE_REORG = "reorg"


class GroupStage:
    def __init__(self, gq: GroupQuantizer, ema_decay: float):
        self.gq = gq
        self.ema_decay = ema_decay

    @property
    def codebook_size(self) -> int:
        return self.gq.q1.size * self.gq.q2.size

    @property
    def stage_name(self) -> str:
        return STAGE_GROUP

    def quantize(self, latents: np.ndarray):
        pairs, q = group_quantize(self.gq, latents)
        return pairs[:, 0] * self.gq.q2.size + pairs[:, 1], q

    def embed(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        c2 = self.gq.q2.size
        a, b = ids // c2, ids % c2
        if np.any(a >= self.gq.q1.size):
            raise ValueError("packed id outside the pair space")
        return np.concatenate([self.gq.q1.entries[a], self.gq.q2.entries[b]], axis=1)

    def train_update(self, latents: np.ndarray, rng: np.random.Generator):
        half = self.gq.q1.dim
        pairs, q = group_quantize(self.gq, latents)
        update_ema(self.gq.q1, pairs[:, 0], latents[:, :half], self.ema_decay, rng)
        update_ema(self.gq.q2, pairs[:, 1], latents[:, half:], self.ema_decay, rng)
        return pairs[:, 0] * self.gq.q2.size + pairs[:, 1], q

    def active_fraction(self) -> float:
        a1 = np.count_nonzero(self.gq.q1.usage_counts) / self.gq.q1.size
        a2 = np.count_nonzero(self.gq.q2.usage_counts) / self.gq.q2.size
        return 0.5 * (a1 + a2)

    def state_arrays(self, prefix: str = "quant/") -> dict:
        return self.gq.state_arrays(prefix)

    @classmethod
    def from_state(cls, arrays: dict, ema_decay: float, prefix: str = "quant/"):
        return cls(GroupQuantizer.from_state(arrays, prefix), ema_decay)


class ReorgStage:
    def __init__(self, cb: Codebook, ema_decay: float):
        self.cb = cb
        self.ema_decay = ema_decay

    @property
    def codebook_size(self) -> int:
        return self.cb.size

    @property
    def stage_name(self) -> str:
        return STAGE_REORG

    def quantize(self, latents: np.ndarray):
        ids, q, _ = quantize_nearest(self.cb, latents)
        return ids, q

    def embed(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        return self.cb.entries[ids].copy()

    def train_update(self, latents: np.ndarray, rng: np.random.Generator):
        ids, q, _ = quantize_nearest(self.cb, latents)
        update_ema(self.cb, ids, latents, self.ema_decay, rng)
        return ids, q

    def active_fraction(self) -> float:
        return float(np.count_nonzero(self.cb.usage_counts)) / self.cb.size

    def state_arrays(self, prefix: str = "quant/") -> dict:
        return self.cb.state_arrays(prefix)

    @classmethod
    def from_state(cls, arrays: dict, ema_decay: float, prefix: str = "quant/"):
        return cls(Codebook.from_state(arrays, prefix), ema_decay)
