"""Codec training losses, differentiable end to end.

Spectral front ends (framing, DFT, mel projection) run inside the autodiff
graph so gradients reach the decoder through the spectrogram comparisons.
The DFT and filterbank matrices are cached per (size, dtype).
"""

from __future__ import annotations

import numpy as np

from ..audio.spectral import SpectralConfig, mel_filterbank, window_values
from ..grad import Tensor, ops
from ..grad.tensor import constant
from .config import LossWeights, MelScale

_MAG_EPS = 1e-9
_LOG_FLOOR = 1e-5

_dft_cache: dict = {}
_mel_cache: dict = {}


def _dft_matrices(fft_size: int, dtype) -> tuple:
    key = (fft_size, np.dtype(dtype).str)
    if key not in _dft_cache:
        n = np.arange(fft_size)[:, None]
        k = np.arange(fft_size // 2 + 1)[None, :]
        ang = 2.0 * np.pi * n * k / fft_size
        cfg = SpectralConfig(fft_size=fft_size, hop=fft_size)
        win = window_values(cfg)[:, None]
        # Window folded into the transform: frames @ C gives windowed DFT parts.
        _dft_cache[key] = (np.asarray(np.cos(ang) * win, dtype=dtype),
                          np.asarray(-np.sin(ang) * win, dtype=dtype))
    return _dft_cache[key]


def _mel_matrix(scale: MelScale, sample_rate_hz: int, dtype) -> np.ndarray:
    key = (scale, sample_rate_hz, np.dtype(dtype).str)
    if key not in _mel_cache:
        cfg = SpectralConfig(fft_size=scale.fft_size, hop=scale.hop, mel_bands=scale.mel_bands)
        _mel_cache[key] = mel_filterbank(cfg, sample_rate_hz).T.astype(dtype)  # [bins, M]
    return _mel_cache[key]


def magnitude_in_graph(wave: Tensor, fft_size: int, hop: int) -> Tensor:
    """Windowed STFT magnitude [B, F, bins] built from differentiable ops."""
    cos_m, sin_m = _dft_matrices(fft_size, wave.data.dtype)
    frames = ops.frame(wave, fft_size, hop)
    re = frames @ constant(cos_m)
    im = frames @ constant(sin_m)
    return ops.sqrt(re * re + im * im + _MAG_EPS)


def log_spectrogram_in_graph(wave: Tensor, fft_size: int, hop: int) -> Tensor:
    """[B, bins, F] log magnitude, channel-first for the discriminators."""
    mag = magnitude_in_graph(wave, fft_size, hop)
    return ops.log(mag + _LOG_FLOOR).transpose(0, 2, 1)


def log_mel_in_graph(wave: Tensor, scale: MelScale, sample_rate_hz: int) -> Tensor:
    """[B, F, mel_bands] log mel magnitude."""
    mag = magnitude_in_graph(wave, scale.fft_size, scale.hop)
    mel = mag @ constant(_mel_matrix(scale, sample_rate_hz, wave.data.dtype))
    return ops.log(mel + _LOG_FLOOR)


def recon_loss_from_mels(mel_x: Tensor, mel_y: Tensor) -> Tensor:
    """Summed L1 plus summed L2 between two mel matrices."""
    if mel_x.shape != mel_y.shape:
        raise ValueError(f"mel shape mismatch: {mel_x.shape} vs {mel_y.shape}")
    diff = mel_x - mel_y
    return ops.abs_(diff).sum() + (diff * diff).sum()


def recon_loss(x: Tensor, x_hat: Tensor, scales, sample_rate_hz: int = 16000) -> Tensor:
    """Multi-scale mel reconstruction distance between waveform batches [B, L]."""
    if x.shape != x_hat.shape:
        raise ValueError(f"waveform shape mismatch: {x.shape} vs {x_hat.shape}")
    total = None
    for scale in scales:
        part = recon_loss_from_mels(log_mel_in_graph(x, scale, sample_rate_hz),
                                    log_mel_in_graph(x_hat, scale, sample_rate_hz))
        total = part if total is None else total + part
    return total


def adv_losses(real_outputs, fake_outputs) -> tuple:
    """Least-squares adversarial pair, averaged over the bank.

    Returns (L_dis, L_gen). For the discriminator step pass fake outputs from
    a detached generator sample; for the generator step L_gen carries the
    gradient back through fake_outputs.
    """
    if not real_outputs or len(real_outputs) != len(fake_outputs):
        raise ValueError("need matching nonempty output lists")
    n = float(len(real_outputs))
    l_dis = None
    l_gen = None
    for real, fake in zip(real_outputs, fake_outputs):
        one = ((real - 1.0) * (real - 1.0)).mean() + (fake * fake).mean()
        gen = ((fake - 1.0) * (fake - 1.0)).mean()
        l_dis = one if l_dis is None else l_dis + one
        l_gen = gen if l_gen is None else l_gen + gen
    return l_dis * (1.0 / n), l_gen * (1.0 / n)


def feature_match_loss(real_feats, fake_feats) -> Tensor:
    """Per-layer mean absolute gap, summed over layers, averaged over the bank.

    real_feats/fake_feats: list (per discriminator) of lists of feature
    tensors. Real features are treated as constants.
    """
    if not real_feats or len(real_feats) != len(fake_feats):
        raise ValueError("need matching nonempty feature lists")
    total = None
    for real_layers, fake_layers in zip(real_feats, fake_feats):
        if len(real_layers) != len(fake_layers):
            raise ValueError("discriminators disagree on layer count")
        for real, fake in zip(real_layers, fake_layers):
            r = real.data if isinstance(real, Tensor) else np.asarray(real)
            if r.shape != fake.shape:
                raise ValueError(f"feature shape mismatch: {r.shape} vs {fake.shape}")
            term = ops.abs_(fake - constant(r)).mean()
            total = term if total is None else total + term
    return total * (1.0 / len(real_feats))


def total_generator_loss(l_rec, l_com, l_gen, l_fm, weights: LossWeights):
    """Weighted sum; exactly linear in its parts."""
    return (weights.lambda_rec * l_rec + weights.lambda_com * l_com
            + weights.lambda_gen * l_gen + weights.lambda_fm * l_fm)
