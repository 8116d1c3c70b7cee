"""Decoder-only transformer over the joint token vocabulary.

Pre-norm blocks with learned positions. The same architecture serves both
the noisy-to-clean semantic model and the semantic-to-acoustic model; only
the training sequences differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grad import ops
from ..grad.nn import Embedding, Layer, LayerNorm, Linear
from ..grad.tensor import Tensor

INIT_SCALE = 0.02


@dataclass(frozen=True)
class LmConfig:
    vocab_size: int
    n_layers: int = 4
    n_heads: int = 4
    dim: int = 128
    context: int = 1024
    dropout: float = 0.0

    def __post_init__(self):
        if min(self.vocab_size, self.n_layers, self.n_heads, self.dim, self.context) < 1:
            raise ValueError("all size fields must be positive")
        if self.dim % self.n_heads:
            raise ValueError(f"dim {self.dim} not divisible by {self.n_heads} heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must sit in [0, 1)")

    def to_dict(self) -> dict:
        return {"vocab_size": self.vocab_size, "n_layers": self.n_layers,
                "n_heads": self.n_heads, "dim": self.dim,
                "context": self.context, "dropout": self.dropout}


def lm_config_from_dict(d: dict) -> LmConfig:
    return LmConfig(**d)


def _dropout(t: Tensor, drop) -> Tensor:
    if drop is None:
        return t
    rate, rng = drop
    keep = (rng.uniform(size=t.shape) >= rate).astype(t.data.dtype) / (1.0 - rate)
    return t * Tensor(keep)


class TransformerBlock(Layer):
    def __init__(self, rng: np.random.Generator, dim: int, n_heads: int):
        self.ln1 = LayerNorm(dim)
        self.attn_qkv = Linear(rng, dim, 3 * dim, scale=INIT_SCALE)
        self.attn_out = Linear(rng, dim, dim, scale=INIT_SCALE)
        self.ln2 = LayerNorm(dim)
        self.ff_in = Linear(rng, dim, 4 * dim, scale=INIT_SCALE)
        self.ff_out = Linear(rng, 4 * dim, dim, scale=INIT_SCALE)
        self.n_heads = n_heads

    def __call__(self, x: Tensor, causal: np.ndarray, drop=None) -> Tensor:
        b, t, d = x.shape
        h = self.n_heads
        qkv = self.attn_qkv(self.ln1(x))
        qkv = qkv.reshape(b, t, 3, h, d // h).transpose(2, 0, 3, 1, 4)  # [3,B,H,T,hd]
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ k.transpose(0, 1, 3, 2)) * ((d // h) ** -0.5) + Tensor(causal)
        ctx = ops.softmax(scores, axis=-1) @ v
        x = x + _dropout(self.attn_out(ctx.transpose(0, 2, 1, 3).reshape(b, t, d)), drop)
        return x + _dropout(self.ff_out(ops.gelu(self.ff_in(self.ln2(x)))), drop)


class TokenLm(Layer):
    """Maps id sequences [B, T] to next-token logits [B, T, V]."""

    def __init__(self, rng: np.random.Generator, cfg: LmConfig):
        self.cfg = cfg
        self.tok = Embedding(rng, cfg.vocab_size, cfg.dim, scale=INIT_SCALE)
        self.pos = Embedding(rng, cfg.context, cfg.dim, scale=INIT_SCALE)
        self.blocks = [TransformerBlock(rng, cfg.dim, cfg.n_heads)
                       for _ in range(cfg.n_layers)]
        self.ln_f = LayerNorm(cfg.dim)
        self.head = Linear(rng, cfg.dim, cfg.vocab_size, scale=INIT_SCALE, bias=False)
        self._causal_cache: dict = {}

    @classmethod
    def init(cls, cfg: LmConfig, seed: int) -> "TokenLm":
        return cls(np.random.default_rng(seed), cfg)

    def _causal(self, t: int, dtype) -> np.ndarray:
        key = (t, np.dtype(dtype).str)
        if key not in self._causal_cache:
            mask = np.zeros((t, t), dtype=dtype)
            mask[np.triu_indices(t, k=1)] = -1e9
            self._causal_cache[key] = mask
        return self._causal_cache[key]

    def __call__(self, tokens: np.ndarray, drop_rng=None) -> Tensor:
        ids = np.asarray(tokens, dtype=np.int64)
        if ids.ndim == 1:
            ids = ids[None, :]
        if ids.ndim != 2:
            raise ValueError(f"tokens must be [T] or [B, T], got {ids.shape}")
        t = ids.shape[1]
        if t > self.cfg.context:
            raise ValueError(f"sequence length {t} exceeds context {self.cfg.context}")
        x = self.tok(ids) + self.pos.weight[:t]
        drop = None
        if drop_rng is not None and self.cfg.dropout > 0.0:
            drop = (self.cfg.dropout, drop_rng)
        causal = self._causal(t, x.data.dtype)
        for block in self.blocks:
            x = block(x, causal, drop)
        return self.head(self.ln_f(x))
