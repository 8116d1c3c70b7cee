"""Next-token training on built samples, plus LM checkpoint save/load.

The objective is cross entropy of logits[:, :-1] against tokens[:, 1:],
counted only where the shifted loss mask is true, so prompts condition the
model without being trained targets.
"""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np

from ..grad import ops
from ..grad.checkpoint import load_checkpoint, save_checkpoint
from ..grad.optim import AdamW, OptimConfig, TrainingDiverged
from ..grad.tensor import Tensor
from ..seeding import derive_seed
from .model import TokenLm, lm_config_from_dict
from .sequences import LmSample, VocabLayout

LOG_COLUMNS = ("step", "loss", "accuracy")
TAIL_WINDOW = 25


def pad_batch(batch, layout: VocabLayout):
    """Right-pad samples to a rectangle; padded positions never carry loss."""
    if not batch:
        raise ValueError("empty batch")
    width = max(len(s) for s in batch)
    tokens = np.full((len(batch), width), layout.pad, dtype=np.int64)
    mask = np.zeros((len(batch), width), dtype=bool)
    for i, s in enumerate(batch):
        tokens[i, : len(s)] = s.tokens
        mask[i, : len(s)] = s.loss_mask
    return tokens, mask


def sequence_loss(model: TokenLm, tokens: np.ndarray, mask: np.ndarray,
                  drop_rng=None) -> Tensor:
    """Masked next-token cross entropy over a [B, T] batch."""
    logits = model(tokens, drop_rng)
    b, t, v = logits.shape
    flat = logits[:, :-1, :].reshape(b * (t - 1), v)
    return ops.cross_entropy(flat, tokens[:, 1:].reshape(-1), mask[:, 1:].reshape(-1))


def masked_accuracy(logits: np.ndarray, tokens: np.ndarray, mask: np.ndarray) -> float:
    """Fraction of mask-true targets hit by the argmax next-token prediction."""
    pred = logits[:, :-1].argmax(axis=-1)
    hits = (pred == tokens[:, 1:])[mask[:, 1:]]
    if hits.size == 0:
        raise ValueError("mask selects no targets")
    return float(hits.mean())


def _tail_mean(values, window: int = TAIL_WINDOW) -> float:
    return float(np.mean(values[-window:]))


def train_lm(model: TokenLm, samples, layout: VocabLayout, steps: int,
             batch_size: int = 8, seed: int = 0, lr: float = 3e-4,
             log_path=None, verbose: bool = False) -> dict:
    """Train in place; returns summary stats and the trailing-mean final loss."""
    samples = list(samples)
    if not samples:
        raise ValueError("no training samples")
    if steps < 1:
        raise ValueError("steps must be positive")
    for s in samples:
        if not isinstance(s, LmSample):
            raise TypeError("samples must be LmSample instances")
        if len(s) > model.cfg.context:
            raise ValueError(f"sample of length {len(s)} exceeds context {model.cfg.context}")

    opt = AdamW(model.named_params(),
                OptimConfig(lr=lr, weight_decay=0.01,
                            warmup_steps=max(1, min(100, steps // 10))))
    batch_rng = np.random.default_rng(derive_seed(seed, "lm-batches"))
    drop_rng = (np.random.default_rng(derive_seed(seed, "lm-dropout"))
                if model.cfg.dropout > 0.0 else None)

    losses, accs = [], []
    log_file = writer = None
    if log_path is not None:
        log_path = Path(log_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_file = open(log_path, "w", newline="")
        writer = csv.writer(log_file)
        writer.writerow(LOG_COLUMNS)
    t0 = time.monotonic()
    try:
        for step in range(1, steps + 1):
            idx = batch_rng.integers(0, len(samples), size=batch_size)
            tokens, mask = pad_batch([samples[i] for i in idx], layout)
            logits = model(tokens, drop_rng)
            b, t, v = logits.shape
            flat = logits[:, :-1, :].reshape(b * (t - 1), v)
            loss = ops.cross_entropy(flat, tokens[:, 1:].reshape(-1),
                                     mask[:, 1:].reshape(-1))
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(f"loss went non-finite at step {step}")
            losses.append(value)
            accs.append(masked_accuracy(logits.data, tokens, mask))
            opt.zero_grad()
            loss.backward()
            opt.step()
            if writer is not None:
                writer.writerow([step, f"{value:.6f}", f"{accs[-1]:.6f}"])
                if step % 100 == 0:
                    log_file.flush()
            if verbose and step % max(1, steps // 20) == 0:
                print(f"step {step}/{steps} loss {value:.4f} acc {accs[-1]:.3f}")
    finally:
        if log_file is not None:
            log_file.close()
    return {"final_loss": _tail_mean(losses), "final_accuracy": _tail_mean(accs),
            "steps": steps, "wall_s": time.monotonic() - t0,
            "log": str(log_path) if log_path is not None else None}


def save_lm(path, model: TokenLm, layout: VocabLayout, meta: dict | None = None):
    arrays = {f"lm/{name}": t.data for name, t in model.named_params()}
    full = {"kind": "token_lm", "config": model.cfg.to_dict(),
            "layout": {"n_semantic": layout.n_semantic, "n_acoustic": layout.n_acoustic}}
    full.update(meta or {})
    save_checkpoint(path, arrays, full)


def load_lm(path):
    """Returns (model, layout, meta)."""
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "token_lm":
        raise ValueError(f"{path} is not a token-lm checkpoint")
    cfg = lm_config_from_dict(meta["config"])
    model = TokenLm.init(cfg, seed=0)
    model.load_state_arrays(arrays, prefix="lm/")
    layout = VocabLayout(**meta["layout"])
    return model, layout, meta
