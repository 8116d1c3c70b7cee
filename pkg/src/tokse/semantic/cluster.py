"""K-means vocabulary over 20-ms frames and nearest-centroid tokenization."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..audio.waveform import Waveform
from ..grad.checkpoint import load_checkpoint, save_checkpoint
from .features import FeatureConfig, FeatureStats, extract_features

FRAME_RATE_HZ = 50


@dataclass(frozen=True)
class SemanticVocab:
    """Fitted cluster centroids plus the feature pipeline they were fit on."""

    centroids: np.ndarray  # [K, f]
    stats: FeatureStats
    feature_config: FeatureConfig

    def __post_init__(self):
        object.__setattr__(self, "centroids", np.asarray(self.centroids, dtype=np.float64))
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise ValueError("centroids must be a [K >= 1, f] matrix")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids must be finite")

    @property
    def size(self) -> int:
        return self.centroids.shape[0]


@dataclass(frozen=True)
class SemanticTokens:
    ids: np.ndarray
    frame_rate_hz: int = FRAME_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "ids", np.asarray(self.ids, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.ids)


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """[N, K] squared distances in float64 via the expansion form."""
    p = points.astype(np.float64, copy=False)
    c = centroids.astype(np.float64, copy=False)
    d = (p * p).sum(axis=1)[:, None] - 2.0 * (p @ c.T) + (c * c).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_distances(points, points[chosen[-1:]])[:, 0]
    while len(chosen) < k:
        probs = d2 / d2.sum()
        chosen.append(int(rng.choice(n, p=probs)))
        d2 = np.minimum(d2, _sq_distances(points, points[chosen[-1:]])[:, 0])
    return points[chosen].astype(np.float64)


def fit_kmeans(features: np.ndarray, k: int, iters: int = 50, seed: int = 0,
               stats: FeatureStats | None = None,
               feature_config: FeatureConfig | None = None) -> SemanticVocab:
    """Lloyd's algorithm with seeded spread-out initialization.

    Inertia is checked to be non-increasing every iteration; empty clusters
    are revived at the point currently farthest from its assigned centroid.
    """
    points = np.asarray(features, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("features must be a nonempty [N, f] matrix")
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = np.unique(points, axis=0)
    if distinct.shape[0] < k:
        raise ValueError(f"need at least {k} distinct rows, found {distinct.shape[0]}")

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(points, k, rng)
    prev_inertia = np.inf
    prev_assign = None
    for _ in range(iters):
        d2 = _sq_distances(points, centroids)
        assign = d2.argmin(axis=1)
        inertia = float(d2[np.arange(len(points)), assign].sum())
        if inertia > prev_inertia * (1.0 + 1e-12) + 1e-9:
            raise RuntimeError(f"inertia increased: {prev_inertia} -> {inertia}")
        prev_inertia = inertia
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign

        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, points)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            own = d2[np.arange(len(points)), assign].copy()
            for ci in np.flatnonzero(~nonempty):
                far = int(own.argmax())
                centroids[ci] = points[far]
                own[far] = -1.0
    if np.unique(centroids, axis=0).shape[0] != k:
        raise RuntimeError("fit collapsed to duplicate centroids")
    return SemanticVocab(centroids, stats or FeatureStats(np.zeros(points.shape[1]),
                                                          np.ones(points.shape[1])),
                         feature_config or FeatureConfig())


def assign_tokens(features: np.ndarray, vocab: SemanticVocab) -> np.ndarray:
    """Nearest centroid per row; ties go to the lowest index."""
    return _sq_distances(np.asarray(features, dtype=np.float64),
                         vocab.centroids).argmin(axis=1).astype(np.int64)


def tokenize(wave: Waveform, vocab: SemanticVocab) -> SemanticTokens:
    feats = extract_features(wave, vocab.feature_config, vocab.stats)
    return SemanticTokens(assign_tokens(feats, vocab))


def save_vocab(path, vocab: SemanticVocab) -> None:
    meta = {"kind": "semantic_vocab",
            "fft_size": vocab.feature_config.fft_size,
            "mel_bands": vocab.feature_config.mel_bands,
            "sample_rate_hz": vocab.feature_config.sample_rate_hz,
            "frame_rate_hz": FRAME_RATE_HZ}
    save_checkpoint(path, {"centroids": vocab.centroids,
                           "feat_mean": vocab.stats.mean,
                           "feat_std": vocab.stats.std}, meta)


def load_vocab(path) -> SemanticVocab:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "semantic_vocab":
        raise ValueError(f"{path} is not a semantic vocabulary checkpoint")
    cfg = FeatureConfig(fft_size=meta["fft_size"], mel_bands=meta["mel_bands"],
                        sample_rate_hz=meta["sample_rate_hz"])
    return SemanticVocab(arrays["centroids"],
                         FeatureStats(arrays["feat_mean"], arrays["feat_std"]), cfg)


def write_token_file(path, sequences) -> None:
    """One utterance per line, ids as space-separated decimals."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [" ".join(str(int(t)) for t in np.asarray(seq).ravel()) for seq in sequences]
    path.write_text("\n".join(lines) + "\n")


def read_token_file(path) -> list:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        out.append(np.array([int(t) for t in line.split()] if line else [], dtype=np.int64))
    return out
