"""Two-way group quantization and the usage-sorted pairwise merge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import Codebook, quantize_nearest

# Remap value for pairs whose members were not both selected.
UNMAPPED = -1


@dataclass
class GroupQuantizer:
    """Latent halves quantized independently: q1 takes dims [:d/2], q2 the rest."""

    q1: Codebook
    q2: Codebook

    def __post_init__(self):
        if self.q1.dim != self.q2.dim:
            raise ValueError(f"group halves must share a dimension, got {self.q1.dim} and {self.q2.dim}")

    @property
    def dim(self) -> int:
        return self.q1.dim + self.q2.dim

    def state_arrays(self, prefix: str = "") -> dict:
        out = self.q1.state_arrays(prefix + "q1/")
        out.update(self.q2.state_arrays(prefix + "q2/"))
        return out

    @classmethod
    def from_state(cls, arrays: dict, prefix: str = ""):
        return cls(Codebook.from_state(arrays, prefix + "q1/"),
                   Codebook.from_state(arrays, prefix + "q2/"))


def group_quantize(gq: GroupQuantizer, latents: np.ndarray):
    """Quantize halves independently; returns (pairs [F, 2], quantized [F, d])."""
    latents = np.asarray(latents)
    if latents.ndim != 2 or latents.shape[1] != gq.dim:
        raise ValueError(f"expected [F, {gq.dim}] latents, got {latents.shape}")
    half = gq.q1.dim
    i1, z1, _ = quantize_nearest(gq.q1, latents[:, :half])
    i2, z2, _ = quantize_nearest(gq.q2, latents[:, half:])
    return np.stack([i1, i2], axis=1), np.concatenate([z1, z2], axis=1)


def _top_by_usage(usage: np.ndarray, n: int) -> np.ndarray:
    """Indices of the n largest usages, ties resolved toward lower index."""
    usage = np.asarray(usage)
    order = np.argsort(-usage, kind="stable")
    return order[:n]


def reorganize(gq: GroupQuantizer, usage1: np.ndarray, usage2: np.ndarray,
               n_keep: int, k_keep: int):
    """Merge the two group books into one big codebook of concatenated pairs.

    The top n_keep codes of q1 and top k_keep of q2 (by usage, ties to the
    lower original index) are selected; output entry a*k_keep + b is
    concat(selected1[a], selected2[b]). Returns (Codebook, remap) where
    remap[i, j] gives the new index for original pair (i, j), or UNMAPPED.

    The merged book starts with unit pseudo-mass per code so the first EMA
    updates refine the concatenated entries instead of discarding them.
    """
    if n_keep < 1 or n_keep > gq.q1.size:
        raise ValueError(f"n_keep must be in [1, {gq.q1.size}], got {n_keep}")
    if k_keep < 1 or k_keep > gq.q2.size:
        raise ValueError(f"k_keep must be in [1, {gq.q2.size}], got {k_keep}")
    if len(usage1) != gq.q1.size or len(usage2) != gq.q2.size:
        raise ValueError("usage vectors must match codebook sizes")

    sel1 = _top_by_usage(usage1, n_keep)
    sel2 = _top_by_usage(usage2, k_keep)
    left = np.repeat(gq.q1.entries[sel1], k_keep, axis=0)
    right = np.tile(gq.q2.entries[sel2], (n_keep, 1))
    entries = np.concatenate([left, right], axis=1)

    merged = Codebook(entries,
                      usage_counts=np.zeros(n_keep * k_keep, dtype=np.int64),
                      ema_cluster_size=np.ones(n_keep * k_keep, dtype=np.float64),
                      ema_embed_sum=entries.astype(np.float64).copy())

    remap = np.full((gq.q1.size, gq.q2.size), UNMAPPED, dtype=np.int64)
    new_a = np.full(gq.q1.size, UNMAPPED, dtype=np.int64)
    new_b = np.full(gq.q2.size, UNMAPPED, dtype=np.int64)
    new_a[sel1] = np.arange(n_keep)
    new_b[sel2] = np.arange(k_keep)
    grid_a, grid_b = np.meshgrid(new_a, new_b, indexing="ij")
    both = (grid_a != UNMAPPED) & (grid_b != UNMAPPED)
    remap[both] = grid_a[both] * k_keep + grid_b[both]
    return merged, remap
