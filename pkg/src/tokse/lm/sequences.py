"""Joint token vocabulary and the prompt/target sequence constructions.

One flat id space serves both language models: semantic ids first, acoustic
ids shifted up by the semantic vocabulary size, then the four specials. Each
built sample carries a per-position role so sequences can be parsed back
exactly and losses applied only to clean-target positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROLE_NOISY_SEM = 0
ROLE_CLEAN_SEM = 1
ROLE_NOISY_AC = 2
ROLE_CLEAN_AC = 3
ROLE_SPECIAL = 4

ROLE_NAMES = {ROLE_NOISY_SEM: "noisy_semantic", ROLE_CLEAN_SEM: "clean_semantic",
              ROLE_NOISY_AC: "noisy_acoustic", ROLE_CLEAN_AC: "clean_acoustic",
              ROLE_SPECIAL: "special"}


@dataclass(frozen=True)
class VocabLayout:
    """Semantic ids in [0, K), acoustic in [K, K+C), then BOS/SEP/EOS/PAD."""

    n_semantic: int
    n_acoustic: int

    def __post_init__(self):
        if self.n_semantic < 1 or self.n_acoustic < 1:
            raise ValueError("both id ranges must be nonempty")

    @property
    def bos(self) -> int:
        return self.n_semantic + self.n_acoustic

    @property
    def sep(self) -> int:
        return self.bos + 1

    @property
    def eos(self) -> int:
        return self.bos + 2

    @property
    def pad(self) -> int:
        return self.bos + 3

    @property
    def vocab_size(self) -> int:
        return self.n_semantic + self.n_acoustic + 4

    def shift_acoustic(self, ids: np.ndarray) -> np.ndarray:
        ids = _checked_ids(ids, self.n_acoustic, "acoustic")
        return ids + self.n_semantic

    def unshift_acoustic(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if np.any(ids < self.n_semantic) or np.any(ids >= self.n_semantic + self.n_acoustic):
            raise ValueError("ids outside the acoustic band")
        return ids - self.n_semantic

    def classify(self, token: int) -> str:
        """Which band a raw id falls in: semantic, acoustic, or a special name."""
        if 0 <= token < self.n_semantic:
            return "semantic"
        if self.n_semantic <= token < self.n_semantic + self.n_acoustic:
            return "acoustic"
        for name in ("bos", "sep", "eos", "pad"):
            if token == getattr(self, name):
                return name
        raise ValueError(f"id {token} outside the vocabulary of {self.vocab_size}")


@dataclass(frozen=True)
class LmSample:
    tokens: np.ndarray     # [T] int64, ids in layout space
    loss_mask: np.ndarray  # [T] bool, true on positions whose token is a training target
    roles: np.ndarray      # [T] int8

    def __post_init__(self):
        object.__setattr__(self, "tokens", np.asarray(self.tokens, dtype=np.int64))
        object.__setattr__(self, "loss_mask", np.asarray(self.loss_mask, dtype=bool))
        object.__setattr__(self, "roles", np.asarray(self.roles, dtype=np.int8))
        if not (len(self.tokens) == len(self.loss_mask) == len(self.roles)):
            raise ValueError("tokens, loss_mask, and roles must align")

    def __len__(self) -> int:
        return len(self.tokens)


def _checked_ids(ids, upper: int, label: str) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64).ravel()
    if ids.size == 0:
        raise ValueError(f"{label} part must be nonempty")
    if np.any(ids < 0) or np.any(ids >= upper):
        raise ValueError(f"{label} ids must sit in [0, {upper})")
    return ids


def _assemble(parts, layout: VocabLayout) -> LmSample:
    """parts: list of (ids, role, masked); BOS/EOS added around, mask covers EOS."""
    tokens = [np.array([layout.bos])]
    mask = [np.array([False])]
    roles = [np.array([ROLE_SPECIAL], dtype=np.int8)]
    for ids, role, masked in parts:
        tokens.append(ids)
        mask.append(np.full(len(ids), masked))
        roles.append(np.full(len(ids), role, dtype=np.int8))
    tokens.append(np.array([layout.eos]))
    mask.append(np.array([True]))
    roles.append(np.array([ROLE_SPECIAL], dtype=np.int8))
    return LmSample(np.concatenate(tokens), np.concatenate(mask), np.concatenate(roles))


def _sep(layout: VocabLayout):
    return (np.array([layout.sep]), ROLE_SPECIAL, False)


def build_n2s_sequence(noisy_sem, clean_sem, layout: VocabLayout) -> LmSample:
    """[BOS, noisy semantic, SEP, clean semantic, EOS]; loss on targets and EOS."""
    noisy = _checked_ids(noisy_sem, layout.n_semantic, "noisy semantic")
    clean = _checked_ids(clean_sem, layout.n_semantic, "clean semantic")
    return _assemble([(noisy, ROLE_NOISY_SEM, False), _sep(layout),
                      (clean, ROLE_CLEAN_SEM, True)], layout)


def build_s2s_sequence(noisy_sem, clean_sem, noisy_ac, clean_ac,
                       layout: VocabLayout, chain_prompt: bool = True) -> LmSample:
    """[BOS, noisy sem, clean sem, noisy acoustic, SEP, clean acoustic, EOS].

    With chain_prompt off the prompt is just the clean semantic tokens, the
    ablation that drops the timbre-carrying halves.
    """
    clean_s = _checked_ids(clean_sem, layout.n_semantic, "clean semantic")
    target = layout.shift_acoustic(clean_ac)
    parts = []
    if chain_prompt:
        parts.append((_checked_ids(noisy_sem, layout.n_semantic, "noisy semantic"),
                      ROLE_NOISY_SEM, False))
    parts.append((clean_s, ROLE_CLEAN_SEM, False))
    if chain_prompt:
        parts.append((layout.shift_acoustic(noisy_ac), ROLE_NOISY_AC, False))
    parts += [_sep(layout), (target, ROLE_CLEAN_AC, True)]
    return _assemble(parts, layout)


def build_single_lm_sequence(noisy_sem, clean_ac, layout: VocabLayout) -> LmSample:
    """Direct noisy-semantic to clean-acoustic mapping, skipping the middle model."""
    noisy = _checked_ids(noisy_sem, layout.n_semantic, "noisy semantic")
    target = layout.shift_acoustic(clean_ac)
    return _assemble([(noisy, ROLE_NOISY_SEM, False), _sep(layout),
                      (target, ROLE_CLEAN_AC, True)], layout)


def parse_sample(sample: LmSample, layout: VocabLayout) -> dict:
    """Recover the original per-role id sequences (acoustic ids unshifted)."""
    out = {}
    for role in (ROLE_NOISY_SEM, ROLE_CLEAN_SEM, ROLE_NOISY_AC, ROLE_CLEAN_AC):
        picked = sample.tokens[sample.roles == role]
        if picked.size == 0:
            continue
        if role in (ROLE_NOISY_AC, ROLE_CLEAN_AC):
            picked = layout.unshift_acoustic(picked)
        out[ROLE_NAMES[role]] = picked
    return out


def substitute_tokens(ids: np.ndarray, rate: float, k: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Corrupt a fraction of positions, each replaced by a different uniform id."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    if k < 2:
        raise ValueError("need at least two ids to substitute")
    ids = np.asarray(ids, dtype=np.int64).copy()
    hit = rng.uniform(size=len(ids)) < rate
    ids[hit] = (ids[hit] + rng.integers(1, k, size=int(hit.sum()))) % k
    return ids
