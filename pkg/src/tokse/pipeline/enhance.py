"""The enhancement chain: noisy waveform in, regenerated clean waveform out.

Stages run in order — tokenize, N2S generation, acoustic encode, S2S
generation, decode — and every failure is tagged with the stage it came
from. Intermediate token streams are part of the result for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio import Waveform
from ..lm import generate, length_cap
from ..semantic import tokenize
from .bundle import ENHANCE_MODES, PipelineBundle


class StageError(RuntimeError):
    """Failure inside one pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class EnhanceResult:
    """Output waveform plus every intermediate token stream (None if the
    mode skipped that stage). Acoustic ids are in codec space, unshifted."""

    wave: Waveform
    noisy_semantic: np.ndarray
    clean_semantic: np.ndarray | None
    noisy_acoustic: np.ndarray | None
    clean_acoustic: np.ndarray


def _staged(stage: str, fn):
    try:
        return fn()
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, str(exc)) from exc


def _decode_kwargs(sampling: str, top_k: int, temperature: float, rng):
    if sampling == "greedy":
        return {"mode": "greedy"}
    return {"mode": "topk", "top_k": top_k, "temperature": temperature, "rng": rng}


def enhance_detailed(noisy: Waveform, bundle: PipelineBundle, mode: str = "full",
                     sampling: str = "greedy", top_k: int = 16,
                     temperature: float = 0.8, rng=None) -> EnhanceResult:
    """Run the chain and keep the intermediates. Greedy decoding by default."""
    if mode not in ENHANCE_MODES:
        raise ValueError(f"mode must be one of {ENHANCE_MODES}, got {mode!r}")
    lay = bundle.layout
    kw = _decode_kwargs(sampling, top_k, temperature, rng)

    s_bar = _staged("tokenize", lambda: tokenize(noisy, bundle.vocab).ids)

    if mode == "single_lm":
        lm = bundle.ablation_lm("single_lm")
        prefix = np.concatenate([[lay.bos], s_bar, [lay.sep]])
        a_hat_raw = _staged("single_lm", lambda: generate(
            lm, lay, prefix, "acoustic", length_cap(len(s_bar)), **kw))
        if a_hat_raw.size == 0:
            raise StageError("single_lm", "model emitted no acoustic tokens")
        s_hat = a_bar = None
    else:
        n2s_prefix = np.concatenate([[lay.bos], s_bar, [lay.sep]])
        s_hat = _staged("n2s", lambda: generate(
            bundle.n2s, lay, n2s_prefix, "semantic", length_cap(len(s_bar)), **kw))
        if s_hat.size == 0:
            raise StageError("n2s", "model emitted no clean semantic tokens")
        a_bar = _staged("encode", lambda: bundle.codec.encode(noisy))
        if mode == "full":
            model = bundle.s2s
            prefix = np.concatenate([[lay.bos], s_bar, s_hat,
                                     lay.shift_acoustic(a_bar), [lay.sep]])
        else:
            model = bundle.ablation_lm("no_chain_prompt")
            prefix = np.concatenate([[lay.bos], s_hat, [lay.sep]])
        a_hat_raw = _staged("s2s", lambda: generate(
            model, lay, prefix, "acoustic", length_cap(len(a_bar)), **kw))
        if a_hat_raw.size == 0:
            raise StageError("s2s", "model emitted no clean acoustic tokens")

    a_hat = lay.unshift_acoustic(a_hat_raw)
    wave = _staged("decode", lambda: bundle.codec.decode(a_hat))
    return EnhanceResult(wave, s_bar, s_hat, a_bar, a_hat)


def enhance(noisy: Waveform, bundle: PipelineBundle, **kwargs) -> Waveform:
    return enhance_detailed(noisy, bundle, **kwargs).wave


def enhance_ablated(noisy: Waveform, bundle: PipelineBundle, mode: str,
                    **kwargs) -> Waveform:
    """Convenience wrapper: the ablation mode is just enhance's mode switch."""
    return enhance_detailed(noisy, bundle, mode=mode, **kwargs).wave
