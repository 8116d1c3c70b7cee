"""Single-codebook vector quantization with EMA updates and usage statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# A code that takes no assignments for this many consecutive updates gets
# re-seeded from the current batch.
RESEED_PATIENCE = 200

# Floor for the EMA cluster-size denominator; also the threshold deciding
# whether a code's running mean is trustworthy enough to overwrite its entry.
EMA_EPS = 1e-5


@dataclass
class Codebook:
    entries: np.ndarray                 # [C, d]
    usage_counts: np.ndarray = None     # [C] cumulative assignments
    ema_cluster_size: np.ndarray = None
    ema_embed_sum: np.ndarray = None
    dead_steps: np.ndarray = field(default=None, repr=False)  # consecutive zero-assignment updates

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float32)
        if self.entries.ndim != 2 or self.entries.shape[0] < 1:
            raise ValueError(f"entries must be [C >= 1, d], got {self.entries.shape}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("codebook entries must be finite")
        c = self.entries.shape[0]
        if self.usage_counts is None:
            self.usage_counts = np.zeros(c, dtype=np.int64)
        if self.ema_cluster_size is None:
            self.ema_cluster_size = np.zeros(c, dtype=np.float64)
        if self.ema_embed_sum is None:
            self.ema_embed_sum = self.entries.astype(np.float64) * self.ema_cluster_size[:, None]
        if self.dead_steps is None:
            self.dead_steps = np.zeros(c, dtype=np.int64)
        for name in ("usage_counts", "ema_cluster_size", "dead_steps"):
            if getattr(self, name).shape != (c,):
                raise ValueError(f"{name} must have shape ({c},)")

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def init_random(cls, rng: np.random.Generator, size: int, dim: int, scale: float = 1.0):
        return cls(rng.normal(0.0, scale, (size, dim)).astype(np.float32))

    def state_arrays(self, prefix: str = "") -> dict:
        return {
            prefix + "entries": self.entries,
            prefix + "usage_counts": self.usage_counts,
            prefix + "ema_cluster_size": self.ema_cluster_size,
            prefix + "ema_embed_sum": self.ema_embed_sum,
            prefix + "dead_steps": self.dead_steps,
        }

    @classmethod
    def from_state(cls, arrays: dict, prefix: str = ""):
        return cls(arrays[prefix + "entries"],
                   arrays[prefix + "usage_counts"].astype(np.int64),
                   arrays[prefix + "ema_cluster_size"].astype(np.float64),
                   arrays[prefix + "ema_embed_sum"].astype(np.float64),
                   arrays[prefix + "dead_steps"].astype(np.int64))


@dataclass(frozen=True)
class UsageReport:
    per_code_counts: np.ndarray
    active_fraction: float
    entropy_bits: float


def quantize_nearest(cb: Codebook, vectors: np.ndarray):
    """Nearest entry per row by squared L2; ties go to the lowest index.

    Returns (indices [F], quantized [F, d] copied from entries, sq_distances [F]).
    Distances are computed in float64.
    """
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or vectors.shape[1] != cb.dim:
        raise ValueError(f"expected [F, {cb.dim}] vectors, got {vectors.shape}")
    v = vectors.astype(np.float64, copy=False)
    e = cb.entries.astype(np.float64)
    # ||v - e||^2 expanded; the cross term is one BLAS call.
    d2 = (v * v).sum(axis=1, keepdims=True) - 2.0 * (v @ e.T) + (e * e).sum(axis=1)
    idx = np.argmin(d2, axis=1)  # first occurrence = lowest index on ties
    sq = np.maximum(d2[np.arange(len(idx)), idx], 0.0)
    return idx.astype(np.int64), cb.entries[idx].copy(), sq


def update_ema(cb: Codebook, assignments: np.ndarray, batch_vectors: np.ndarray,
               decay: float, rng: np.random.Generator | None = None,
               reseed_patience: int = RESEED_PATIENCE) -> Codebook:
    """EMA codebook update in place; returns cb.

    Per code: size <- decay*size + (1-decay)*batch_count, embedding sum
    likewise; entries with meaningful running mass become sum/size. Codes
    starved for reseed_patience consecutive updates are re-seeded from random
    batch rows when an rng is supplied.
    """
    if not 0.0 <= decay <= 1.0:
        raise ValueError(f"decay must be in [0, 1], got {decay}")
    assignments = np.asarray(assignments, dtype=np.int64)
    if assignments.size == 0:
        return cb
    if np.any(assignments < 0) or np.any(assignments >= cb.size):
        raise ValueError("assignment index outside codebook")
    batch = np.asarray(batch_vectors, dtype=np.float64)
    if batch.shape != (assignments.shape[0], cb.dim):
        raise ValueError(f"batch shape {batch.shape} does not match assignments/dim")

    counts = np.bincount(assignments, minlength=cb.size).astype(np.float64)
    sums = np.zeros((cb.size, cb.dim), dtype=np.float64)
    np.add.at(sums, assignments, batch)

    cb.usage_counts += counts.astype(np.int64)
    cb.ema_cluster_size *= decay
    cb.ema_cluster_size += (1.0 - decay) * counts
    cb.ema_embed_sum *= decay
    cb.ema_embed_sum += (1.0 - decay) * sums

    live = cb.ema_cluster_size > EMA_EPS
    denom = np.maximum(cb.ema_cluster_size[live], EMA_EPS)
    cb.entries[live] = (cb.ema_embed_sum[live] / denom[:, None]).astype(np.float32)

    starved = counts == 0
    cb.dead_steps[starved] += 1
    cb.dead_steps[~starved] = 0
    if rng is not None and reseed_patience > 0:
        to_seed = np.flatnonzero(cb.dead_steps >= reseed_patience)
        if to_seed.size:
            rows = rng.integers(0, batch.shape[0], size=to_seed.size)
            cb.entries[to_seed] = batch[rows].astype(np.float32)
            cb.ema_embed_sum[to_seed] = batch[rows]
            cb.ema_cluster_size[to_seed] = 1.0
            cb.dead_steps[to_seed] = 0
    return cb


def measure_usage(cb: Codebook, latents: np.ndarray, chunk: int = 8192) -> UsageReport:
    """Assignment statistics of a full calibration pass; does not mutate cb."""
    latents = np.asarray(latents)
    if latents.ndim != 2 or latents.shape[0] == 0:
        raise ValueError("measure_usage needs a nonempty [F, d] dataset")
    counts = np.zeros(cb.size, dtype=np.int64)
    for lo in range(0, latents.shape[0], chunk):
        idx, _, _ = quantize_nearest(cb, latents[lo: lo + chunk])
        counts += np.bincount(idx, minlength=cb.size)
    active = float(np.count_nonzero(counts)) / cb.size
    p = counts[counts > 0] / counts.sum()
    entropy = float(-(p * np.log2(p)).sum())
    return UsageReport(counts, active, entropy)


def write_usage_csv(path, report: UsageReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["code_index", "count"])
        for i, c in enumerate(report.per_code_counts):
            writer.writerow([i, int(c)])


def read_usage_csv(path) -> UsageReport:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["code_index", "count"]:
        raise ValueError(f"{path}: not a usage csv")
    counts = np.zeros(len(rows) - 1, dtype=np.int64)
    for r in rows[1:]:
        counts[int(r[0])] = int(r[1])
    active = float(np.count_nonzero(counts)) / len(counts)
    p = counts[counts > 0] / max(1, counts.sum())
    entropy = float(-(p * np.log2(p)).sum()) if counts.sum() else 0.0
    return UsageReport(counts, active, entropy)
