"""Synthetic speech-like utterances, noise textures, and room responses.

Speech is additive harmonic synthesis: a drifting fundamental with vibrato,
harmonic amplitudes shaped by a fixed per-speaker resonance envelope, and a
syllabic amplitude modulation. Not speech, but it has the right structure
for codecs and tokenizers to latch onto: pitch, timbre, and rhythm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..seeding import derive_seed
from .waveform import DEFAULT_SAMPLE_RATE, Waveform

NOISE_KINDS = ("white", "pink", "brown", "hum")

_PEAK_TARGET = 0.9
_BREATH_LEVEL = 0.004
_RAMP_S = 0.02


@dataclass(frozen=True)
class SpeakerTemplate:
    """Fixed voice identity: pitch, resonances, vibrato."""

    fundamental_hz: float
    formant_centers_hz: tuple
    formant_bandwidths_hz: tuple
    vibrato_rate_hz: float = 5.0
    vibrato_depth: float = 0.015

    def __post_init__(self):
        if len(self.formant_centers_hz) != len(self.formant_bandwidths_hz):
            raise ValueError("formant centers and bandwidths must pair up")
        if self.fundamental_hz <= 0:
            raise ValueError(f"fundamental must be positive, got {self.fundamental_hz}")
        if any(c <= 0 for c in self.formant_centers_hz) or any(b <= 0 for b in self.formant_bandwidths_hz):
            raise ValueError("formant centers and bandwidths must be positive")


def default_templates(n_speakers: int = 8, seed: int = 0) -> list:
    """Deterministic speaker set spanning low to high voices."""
    rng = np.random.default_rng(derive_seed(seed, "speakers"))
    out = []
    for i in range(n_speakers):
        f0 = 90.0 * (2.0 ** (i / max(1, n_speakers - 1)))  # ~90..180 Hz
        f0 *= 1.0 + 0.05 * rng.uniform(-1, 1)
        centers = (rng.uniform(350, 850), rng.uniform(900, 1800), rng.uniform(2100, 3200))
        widths = tuple(c * rng.uniform(0.08, 0.16) for c in centers)
        out.append(SpeakerTemplate(f0, centers, widths,
                                   vibrato_rate_hz=rng.uniform(4.0, 6.5),
                                   vibrato_depth=rng.uniform(0.008, 0.02)))
    return out


def _resonance_envelope(freqs_hz: np.ndarray, template: SpeakerTemplate) -> np.ndarray:
    """Lorentzian bumps at formants on a gentle high-frequency rolloff."""
    env = np.full(freqs_hz.shape, 0.03)
    for center, width in zip(template.formant_centers_hz, template.formant_bandwidths_hz):
        env += 1.0 / (1.0 + ((freqs_hz - center) / width) ** 2)
    return env


def _smooth_contour(rng: np.random.Generator, n: int, n_knots: int, scale: float) -> np.ndarray:
    knots = rng.normal(0.0, scale, size=n_knots)
    return np.interp(np.linspace(0.0, 1.0, n), np.linspace(0.0, 1.0, n_knots), knots)


def synth_utterance(seed: int, duration_s: float, template: SpeakerTemplate,
                    sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Render one utterance. Same (seed, duration, template, rate) -> same samples."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    if n <= 0:
        raise ValueError(f"duration {duration_s} s yields no samples")
    t = np.arange(n) / sample_rate_hz

    vib_phase = rng.uniform(0, 2 * np.pi)
    drift = _smooth_contour(rng, n, n_knots=8, scale=0.015)
    f0 = template.fundamental_hz * (
        1.0 + drift + template.vibrato_depth * np.sin(2 * np.pi * template.vibrato_rate_hz * t + vib_phase))
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate_hz

    f0_max = float(np.max(f0))
    n_harm = max(1, int(0.95 * (sample_rate_hz / 2) / f0_max))
    h = np.arange(1, n_harm + 1)
    amps = _resonance_envelope(h * template.fundamental_hz, template) / h
    harm_phases = rng.uniform(0, 2 * np.pi, size=n_harm)
    x = (amps[:, None] * np.sin(h[:, None] * phase[None, :] + harm_phases[:, None])).sum(axis=0)

    # Syllabic rhythm: raised-cosine dips, never fully silent.
    syl_rate = rng.uniform(2.5, 4.0)
    syl_phase = rng.uniform(0, 2 * np.pi)
    syl = 0.25 + 0.75 * (0.5 - 0.5 * np.cos(2 * np.pi * syl_rate * t + syl_phase)) ** 1.5
    x *= syl
    x += _BREATH_LEVEL * rng.standard_normal(n) * syl

    ramp = min(int(_RAMP_S * sample_rate_hz), n // 2)
    if ramp > 0:
        fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        x[:ramp] *= fade
        x[-ramp:] *= fade[::-1]

    peak = np.max(np.abs(x))
    if peak > 0:
        x *= _PEAK_TARGET / peak
    return Waveform(x, sample_rate_hz)


def noise_signal(kind: str, n_samples: int, seed: int,
                 sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Unit-RMS noise of the named kind; scaling happens at mix time."""
    rng = np.random.default_rng(seed)
    if kind == "white":
        x = rng.standard_normal(n_samples)
    elif kind in ("pink", "brown"):
        white = rng.standard_normal(n_samples)
        spec = np.fft.rfft(white)
        f = np.fft.rfftfreq(n_samples, d=1.0 / sample_rate_hz)
        f[0] = f[1] if n_samples > 1 else 1.0
        slope = 0.5 if kind == "pink" else 1.0  # amplitude ~ 1/f^slope
        spec /= np.maximum(f, 20.0) ** slope
        x = np.fft.irfft(spec, n=n_samples)
    elif kind == "hum":
        t = np.arange(n_samples) / sample_rate_hz
        x = np.zeros(n_samples)
        for k, level in ((1, 1.0), (2, 0.5), (3, 0.25)):
            x += level * np.sin(2 * np.pi * 50.0 * k * t + rng.uniform(0, 2 * np.pi))
        x += 0.05 * rng.standard_normal(n_samples)
    else:
        raise ValueError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    rms = np.sqrt(np.mean(x ** 2))
    return Waveform(x / max(rms, 1e-12), sample_rate_hz)


def synth_rir(seed: int, rt60_s: float, sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    """Exponentially decaying noise behind a direct tap at lag zero, unit energy."""
    if rt60_s <= 0:
        raise ValueError(f"rt60 must be positive, got {rt60_s}")
    rng = np.random.default_rng(seed)
    n = max(16, int(rt60_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    # exp(-6.908 t / rt60) is -60 dB at t = rt60.
    h = rng.standard_normal(n) * np.exp(-6.9078 * t / rt60_s) * 0.5
    h[0] = 1.0
    return h / np.sqrt(np.sum(h ** 2))
