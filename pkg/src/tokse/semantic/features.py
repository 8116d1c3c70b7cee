"""Frame-level log-mel features at a fixed 20-ms rate.

The frame count is exactly floor(duration / 20 ms) regardless of the analysis
window, so token sequences line up one-to-one with 20-ms slots. The tail of
the last window is zero-padded as needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio.spectral import SpectralConfig, mel_filterbank, window_values
from ..audio.waveform import Waveform

FRAME_SECONDS = 0.02


@dataclass(frozen=True)
class FeatureConfig:
    fft_size: int = 512
    mel_bands: int = 40
    sample_rate_hz: int = 16000

    @property
    def hop(self) -> int:
        return int(round(self.sample_rate_hz * FRAME_SECONDS))


@dataclass(frozen=True)
class FeatureStats:
    """Per-dimension corpus mean/std used to normalize features."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be matching vectors")
        if np.any(self.std <= 0):
            raise ValueError("std must be strictly positive")


def _raw_features(wave: Waveform, cfg: FeatureConfig) -> np.ndarray:
    if wave.sample_rate_hz != cfg.sample_rate_hz:
        raise ValueError(f"expected {cfg.sample_rate_hz} Hz input, got {wave.sample_rate_hz}")
    hop = cfg.hop
    n_frames = len(wave) // hop
    if n_frames < 1:
        raise ValueError(f"input of {len(wave)} samples is shorter than one {hop}-sample frame")
    need = (n_frames - 1) * hop + cfg.fft_size
    x = wave.samples
    if len(x) < need:
        x = np.pad(x, (0, need - len(x)))
    idx = np.arange(cfg.fft_size)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx]
    spec_cfg = SpectralConfig(fft_size=cfg.fft_size, hop=hop, mel_bands=cfg.mel_bands)
    win = window_values(spec_cfg)
    mag = np.abs(np.fft.rfft(frames * win, axis=1))
    fb = mel_filterbank(spec_cfg, cfg.sample_rate_hz)
    return np.log(np.maximum(mag @ fb.T, 1e-10))


def fit_feature_stats(waves, cfg: FeatureConfig | None = None) -> FeatureStats:
    """Corpus mean/std over raw (unnormalized) frames."""
    cfg = cfg or FeatureConfig()
    stacked = np.concatenate([_raw_features(w, cfg) for w in waves], axis=0)
    return FeatureStats(stacked.mean(axis=0), np.maximum(stacked.std(axis=0), 1e-8))


def extract_features(wave: Waveform, cfg: FeatureConfig | None = None,
                     stats: FeatureStats | None = None) -> np.ndarray:
    """[T, mel_bands] frames, T = floor(duration / 20 ms); normalized if stats given."""
    cfg = cfg or FeatureConfig()
    feats = _raw_features(wave, cfg)
    if stats is not None:
        if stats.mean.shape[0] != feats.shape[1]:
            raise ValueError("stats dimension does not match feature dimension")
        feats = (feats - stats.mean) / stats.std
    return feats
