"""Trained-artifact bundle: one directory holding every checkpoint the
enhancement chain needs, plus its config snapshot and provenance manifest.

Consistency is enforced at load time: the two LMs must share one vocabulary
layout, and that layout must match the semantic vocabulary size and the
codec's merged codebook.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..codec import load_codec
from ..codec.quantize import STAGE_REORG
from ..lm import TokenLm, VocabLayout, load_lm
from ..semantic import FRAME_RATE_HZ, SemanticVocab, load_vocab

CODEC_STAGE1 = "codec_stage1.ckpt"
CODEC_STAGE2 = "codec_stage2.ckpt"
SEMANTIC_VOCAB = "semantic_vocab.ckpt"
N2S_CHECKPOINT = "n2s.ckpt"
S2S_CHECKPOINT = "s2s.ckpt"
S2S_NO_CHAIN_CHECKPOINT = "s2s_no_chain.ckpt"
SINGLE_LM_CHECKPOINT = "single_lm.ckpt"
CONFIG_SNAPSHOT = "config.json"
PROVENANCE = "provenance.json"
PLAN_LOG = "plan_log.txt"

ENHANCE_MODES = ("full", "no_chain_prompt", "single_lm")
_ABLATION_FILES = {"no_chain_prompt": S2S_NO_CHAIN_CHECKPOINT,
                   "single_lm": SINGLE_LM_CHECKPOINT}


class BundleError(RuntimeError):
    """A bundle directory is incomplete or internally inconsistent."""


@dataclass
class PipelineBundle:
    root: Path
    codec: object
    codec_meta: dict
    vocab: SemanticVocab
    n2s: TokenLm
    s2s: TokenLm
    layout: VocabLayout
    config: dict
    _ablations: dict = field(default_factory=dict)

    def ablation_lm(self, mode: str) -> TokenLm:
        """Load (and cache) the extra LM an ablation mode runs on."""
        if mode not in _ABLATION_FILES:
            raise ValueError(f"no ablation checkpoint for mode {mode!r}")
        if mode not in self._ablations:
            path = self.root / _ABLATION_FILES[mode]
            if not path.exists():
                raise BundleError(
                    f"mode '{mode}' requires {path.name}, which the bundle lacks")
            model, layout, _ = load_lm(path)
            if layout != self.layout:
                raise BundleError(f"{path.name} was trained on a different vocabulary layout")
            self._ablations[mode] = model
        return self._ablations[mode]


def load_bundle(root) -> PipelineBundle:
    root = Path(root)
    for name in (CODEC_STAGE2, SEMANTIC_VOCAB, N2S_CHECKPOINT, S2S_CHECKPOINT):
        if not (root / name).exists():
            raise BundleError(f"bundle at {root} is missing {name}")

    codec, codec_meta = load_codec(root / CODEC_STAGE2)
    if codec_meta.get("stage") != STAGE_REORG:
        raise BundleError("bundle codec must be a merged-codebook (stage-2) checkpoint")
    vocab = load_vocab(root / SEMANTIC_VOCAB)
    n2s, n2s_layout, _ = load_lm(root / N2S_CHECKPOINT)
    s2s, s2s_layout, _ = load_lm(root / S2S_CHECKPOINT)

    expected = VocabLayout(vocab.centroids.shape[0], codec.quantizer.codebook_size)
    for name, layout in (("n2s", n2s_layout), ("s2s", s2s_layout)):
        if layout != expected:
            raise BundleError(
                f"{name} layout ({layout.n_semantic}, {layout.n_acoustic}) does not match "
                f"vocab K={expected.n_semantic} and codec C={expected.n_acoustic}")
    if codec.cfg.tokens_per_second != FRAME_RATE_HZ:
        raise BundleError(
            f"codec runs at {codec.cfg.tokens_per_second:g} tokens/s but the semantic "
            f"tokenizer at {FRAME_RATE_HZ} Hz; only matched rates are supported")

    config_path = root / CONFIG_SNAPSHOT
    config = json.loads(config_path.read_text()) if config_path.exists() else {}
    return PipelineBundle(root, codec, codec_meta, vocab, n2s, s2s, expected, config)
