"""STFT and mel analysis used by losses, features, and metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .waveform import Waveform


@dataclass(frozen=True)
class SpectralConfig:
    """Analysis settings: window length doubles as FFT size."""

    fft_size: int = 512
    hop: int = 128
    window: str = "hann"
    mel_bands: int = 40
    fmin_hz: float = 50.0
    fmax_hz: float = 8000.0

    def __post_init__(self):
        if self.fft_size <= 0 or (self.fft_size & (self.fft_size - 1)) != 0:
            raise ValueError(f"fft_size must be a positive power of two, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ValueError(f"hop must be in (0, fft_size], got {self.hop}")
        if self.window not in ("hann", "rect"):
            raise ValueError(f"unknown window {self.window!r}")
        if not 0.0 <= self.fmin_hz < self.fmax_hz:
            raise ValueError(f"need 0 <= fmin < fmax, got {self.fmin_hz}, {self.fmax_hz}")
        if self.mel_bands <= 0:
            raise ValueError(f"mel_bands must be positive, got {self.mel_bands}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


def window_values(cfg: SpectralConfig) -> np.ndarray:
    if cfg.window == "hann":
        # Periodic variant: the length-N cycle of a length-N+1 symmetric window.
        n = np.arange(cfg.fft_size)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / cfg.fft_size)
    return np.ones(cfg.fft_size)


def frame_signal(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    """Strided view of full frames, [n_frames, frame]. No padding."""
    x = np.ascontiguousarray(x)
    if x.shape[0] < frame:
        raise ValueError(f"signal of {x.shape[0]} samples is shorter than one {frame}-sample frame")
    return np.lib.stride_tricks.sliding_window_view(x, frame)[::hop]


def stft(wav: Waveform, cfg: SpectralConfig) -> np.ndarray:
    """Complex spectrogram, [n_frames, fft_size//2 + 1]."""
    frames = frame_signal(wav.samples, cfg.fft_size, cfg.hop)
    return np.fft.rfft(frames * window_values(cfg), axis=-1)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: SpectralConfig, sample_rate_hz: int) -> np.ndarray:
    """Triangular filters on the mel scale, peak height 1, [mel_bands, n_bins].

    Band edges are spaced uniformly in mel between fmin and fmax; each row is
    a triangle over FFT bin frequencies. Peak normalization keeps a filter's
    response to flat-spectrum input proportional to its bandwidth.
    """
    if cfg.fmax_hz > sample_rate_hz / 2:
        raise ValueError(f"fmax {cfg.fmax_hz} Hz above Nyquist {sample_rate_hz / 2} Hz")
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax_hz), cfg.mel_bands + 2))
    bin_hz = np.arange(cfg.n_bins) * (sample_rate_hz / cfg.fft_size)
    lo, mid, hi = edges_hz[:-2, None], edges_hz[1:-1, None], edges_hz[2:, None]
    rising = (bin_hz - lo) / (mid - lo)
    falling = (hi - bin_hz) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    if np.any(fb.sum(axis=1) == 0.0):
        raise ValueError("mel band too narrow for FFT resolution; raise fft_size or lower mel_bands")
    return fb


def mel_spectrogram(wav: Waveform, cfg: SpectralConfig, floor: float = 1e-10) -> np.ndarray:
    """Log-magnitude mel spectrogram, [mel_bands, n_frames], natural log."""
    mag = np.abs(stft(wav, cfg))
    mel = mel_filterbank(cfg, wav.sample_rate_hz) @ mag.T
    return np.log(np.maximum(mel, floor))
