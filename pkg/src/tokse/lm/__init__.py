"""Decoder-only token language models over the joint semantic/acoustic vocabulary."""

from .generate import DEFAULT_TEMPERATURE, DEFAULT_TOP_K, generate, length_cap
from .model import LmConfig, TokenLm, TransformerBlock, lm_config_from_dict
from .sequences import (ROLE_CLEAN_AC, ROLE_CLEAN_SEM, ROLE_NOISY_AC,
                        ROLE_NOISY_SEM, ROLE_SPECIAL, LmSample, VocabLayout,
                        build_n2s_sequence, build_s2s_sequence,
                        build_single_lm_sequence, parse_sample,
                        substitute_tokens)
from .training import (load_lm, masked_accuracy, pad_batch, save_lm,
                       sequence_loss, train_lm)

__all__ = [
    "DEFAULT_TEMPERATURE", "DEFAULT_TOP_K", "LmConfig", "LmSample",
    "ROLE_CLEAN_AC", "ROLE_CLEAN_SEM", "ROLE_NOISY_AC", "ROLE_NOISY_SEM",
    "ROLE_SPECIAL", "TokenLm", "TransformerBlock", "VocabLayout",
    "build_n2s_sequence", "build_s2s_sequence", "build_single_lm_sequence",
    "generate", "length_cap", "lm_config_from_dict", "load_lm",
    "masked_accuracy", "pad_batch", "parse_sample", "save_lm",
    "sequence_loss", "substitute_tokens", "train_lm",
]
