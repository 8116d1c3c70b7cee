"""Objective metrics for reconstruction and enhancement quality.

All metrics are pure functions of waveforms (or token streams). The mel
analysis settings default to the 512-point, 40-band configuration used
everywhere else in the package.
"""

from __future__ import annotations

import math

import numpy as np

from ..audio import SpectralConfig, Waveform, mel_spectrogram, stft

DEFAULT_SPECTRUM = SpectralConfig()
DB_PER_LN = 20.0 / math.log(10.0)  # natural-log magnitude difference -> dB
SI_SNR_CAP_DB = 60.0
DEFAULT_CEPSTRAL_ORDER = 13


def _same_rate(ref: Waveform, est: Waveform):
    if ref.sample_rate_hz != est.sample_rate_hz:
        raise ValueError(f"sample rates differ: {ref.sample_rate_hz} vs {est.sample_rate_hz}")


def _same_length(ref: Waveform, est: Waveform):
    _same_rate(ref, est)
    if ref.samples.shape != est.samples.shape:
        raise ValueError(f"lengths differ: {ref.samples.shape[0]} vs {est.samples.shape[0]} samples")


def lsd(ref: Waveform, est: Waveform, cfg: SpectralConfig = DEFAULT_SPECTRUM,
        floor: float = 1e-10) -> float:
    """Log-spectral distance in dB: RMS log-mel magnitude difference.

    Doubling the signal shifts every mel cell by a constant factor of two,
    so lsd(x, 2x) = 20*log10(2). Symmetric in its arguments.
    """
    _same_length(ref, est)
    lr = mel_spectrogram(ref, cfg, floor)
    le = mel_spectrogram(est, cfg, floor)
    return float(DB_PER_LN * np.sqrt(np.mean((le - lr) ** 2)))


def lsd_trimmed(ref: Waveform, est: Waveform, cfg: SpectralConfig = DEFAULT_SPECTRUM,
                floor: float = 1e-10) -> float:
    """lsd over the common prefix, for outputs whose length may differ
    from the reference (generated token streams stop where they stop)."""
    _same_rate(ref, est)
    n = min(ref.samples.shape[0], est.samples.shape[0])
    if n < cfg.fft_size:
        raise ValueError(f"common prefix of {n} samples is shorter than one analysis frame")
    return lsd(Waveform(ref.samples[:n], ref.sample_rate_hz),
               Waveform(est.samples[:n], est.sample_rate_hz), cfg, floor)


def _dct_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Orthonormal type-II DCT rows, [n_out, n_in]."""
    i = np.arange(n_in)
    m = np.cos(np.pi / n_in * (i[None, :] + 0.5) * np.arange(n_out)[:, None])
    m *= math.sqrt(2.0 / n_in)
    m[0] /= math.sqrt(2.0)
    return m


def cepstra(wav: Waveform, cfg: SpectralConfig = DEFAULT_SPECTRUM,
            order: int = DEFAULT_CEPSTRAL_ORDER, floor: float = 1e-10) -> np.ndarray:
    """Mel-cepstral coefficients c0..c_order per frame, [n_frames, order + 1]."""
    if not 1 <= order < cfg.mel_bands:
        raise ValueError(f"order must be in [1, {cfg.mel_bands}), got {order}")
    logmel = mel_spectrogram(wav, cfg, floor)  # [bands, frames], natural log
    return (_dct_matrix(cfg.mel_bands, order + 1) @ logmel).T


def mcd_from_cepstra(c_ref: np.ndarray, c_est: np.ndarray) -> float:
    """(10/ln10) * sqrt(2 * mean-over-frames sum-over-coeffs diff^2), c0 excluded."""
    c_ref, c_est = np.asarray(c_ref, np.float64), np.asarray(c_est, np.float64)
    if c_ref.shape != c_est.shape:
        raise ValueError(f"cepstra shapes differ: {c_ref.shape} vs {c_est.shape}")
    if c_ref.ndim != 2 or c_ref.shape[0] == 0 or c_ref.shape[1] < 2:
        raise ValueError("need [n_frames, order + 1] cepstra with at least one frame")
    per_frame = ((c_est[:, 1:] - c_ref[:, 1:]) ** 2).sum(axis=1)
    return float(10.0 / math.log(10.0) * math.sqrt(2.0 * per_frame.mean()))


def mcd(ref: Waveform, est: Waveform, order: int = DEFAULT_CEPSTRAL_ORDER,
        cfg: SpectralConfig = DEFAULT_SPECTRUM) -> float:
    """Mel-cepstral distortion in dB between equal-length waveforms."""
    _same_length(ref, est)
    return mcd_from_cepstra(cepstra(ref, cfg, order), cepstra(est, cfg, order))


def si_snr(ref: Waveform, est: Waveform, cap_db: float = SI_SNR_CAP_DB) -> float:
    """Scale-invariant SNR in dB, clipped to +-cap_db.

    Only meaningful for time-aligned reconstruction; generative output has
    no sample alignment for this to measure.
    """
    _same_length(ref, est)
    r = ref.samples.astype(np.float64)
    e = est.samples.astype(np.float64)
    r = r - r.mean()
    e = e - e.mean()
    r_energy = float(r @ r)
    if r_energy == 0.0:
        raise ValueError("reference is silent; SI-SNR is undefined")
    target = (float(e @ r) / r_energy) * r
    residual = e - target
    num, den = float(target @ target), float(residual @ residual)
    if num == 0.0:
        return -cap_db
    if den == 0.0 or 10.0 * math.log10(num / den) > cap_db:
        return cap_db
    return max(10.0 * math.log10(num / den), -cap_db)


def long_term_average_spectrum(wav: Waveform, cfg: SpectralConfig = DEFAULT_SPECTRUM,
                               floor: float = 1e-10) -> np.ndarray:
    """Log of the time-averaged magnitude spectrum, [fft_size // 2 + 1]."""
    return np.log(np.mean(np.abs(stft(wav, cfg)), axis=0) + floor)


def timbre_correlation(out: Waveform, ref: Waveform,
                       cfg: SpectralConfig = DEFAULT_SPECTRUM) -> float:
    """Pearson correlation of long-term average spectra; a speaker-timbre
    surrogate that tolerates different lengths."""
    _same_rate(out, ref)
    a = long_term_average_spectrum(out, cfg)
    b = long_term_average_spectrum(ref, cfg)
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        raise ValueError("flat spectrum; correlation is undefined")
    return float(np.corrcoef(a, b)[0, 1])


def token_accuracy(ref_ids, est_ids) -> float:
    """Fraction of positions where two equal-length token streams agree."""
    ref_ids, est_ids = np.asarray(ref_ids), np.asarray(est_ids)
    if ref_ids.shape != est_ids.shape:
        raise ValueError(f"token streams differ in shape: {ref_ids.shape} vs {est_ids.shape}")
    if ref_ids.size == 0:
        raise ValueError("empty token streams")
    return float(np.mean(ref_ids == est_ids))
