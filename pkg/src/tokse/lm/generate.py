"""Autoregressive decoding with per-stage class restriction.

The prompt ends at SEP; each emitted id must belong to the stage's legal
band (semantic or acoustic), with EOS always available as the stop signal.
Illegal ids are masked to -inf before the argmax or the sample draw.
"""

from __future__ import annotations

import math

import numpy as np

from ..grad.tensor import no_grad
from .model import TokenLm
from .sequences import VocabLayout

DEFAULT_TOP_K = 16
DEFAULT_TEMPERATURE = 0.8


def length_cap(source_frames: int) -> int:
    """Generation budget: a quarter more than the conditioning frame count."""
    if source_frames < 1:
        raise ValueError("source_frames must be positive")
    return int(math.ceil(1.25 * source_frames))


def _allowed_ids(layout: VocabLayout, allowed: str) -> np.ndarray:
    ok = np.zeros(layout.vocab_size, dtype=bool)
    if allowed == "semantic":
        ok[: layout.n_semantic] = True
    elif allowed == "acoustic":
        ok[layout.n_semantic: layout.n_semantic + layout.n_acoustic] = True
    else:
        raise ValueError(f"allowed must be 'semantic' or 'acoustic', got {allowed!r}")
    ok[layout.eos] = True
    return ok


def generate(model: TokenLm, layout: VocabLayout, prefix, allowed: str,
             max_new: int, mode: str = "greedy", top_k: int = DEFAULT_TOP_K,
             temperature: float = DEFAULT_TEMPERATURE, rng=None) -> np.ndarray:
    """Decode until EOS or max_new ids; returns the new ids, EOS excluded.

    Hitting the cap without EOS is a recorded outcome, not an error.
    """
    prefix = np.asarray(prefix, dtype=np.int64).ravel()
    if prefix.size == 0 or prefix[-1] != layout.sep:
        raise ValueError("prefix must end at the separator token")
    if max_new < 1:
        raise ValueError("max_new must be positive")
    if mode not in ("greedy", "topk"):
        raise ValueError(f"unknown decode mode {mode!r}")
    if mode == "topk":
        if rng is None:
            raise ValueError("top-k sampling needs an rng")
        if top_k < 1 or temperature <= 0:
            raise ValueError("top_k must be >= 1 and temperature positive")

    ok = _allowed_ids(layout, allowed)
    k = min(top_k, int(ok.sum()))
    seq = [int(x) for x in prefix]
    out = []
    with no_grad():
        for _ in range(max_new):
            window = np.array(seq[-model.cfg.context:], dtype=np.int64)
            row = model(window).data[0, -1].astype(np.float64).copy()
            row[~ok] = -np.inf
            if mode == "greedy":
                nxt = int(row.argmax())
            else:
                top = np.argpartition(row, -k)[-k:]
                logp = row[top] / temperature
                p = np.exp(logp - logp.max())
                nxt = int(top[rng.choice(k, p=p / p.sum())])
            if nxt == layout.eos:
                break
            out.append(nxt)
            seq.append(nxt)
    return np.array(out, dtype=np.int64)
