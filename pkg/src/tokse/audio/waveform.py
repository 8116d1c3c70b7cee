"""Mono waveform container and 16-bit PCM WAV I/O."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_SAMPLE_RATE = 16000

# Symmetric full scale: +1.0 and -1.0 map to +/-32767.
PCM_SCALE = 32767.0


@dataclass(frozen=True)
class Waveform:
    """1-D float audio, nominally in [-1, 1], plus its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self) else 0.0

    def power(self) -> float:
        """Mean squared amplitude."""
        return float(np.mean(self.samples ** 2)) if len(self) else 0.0


def encode_pcm16(samples: np.ndarray) -> np.ndarray:
    """Float -> int16 with round-half-away-from-zero, clipping outside [-1, 1]."""
    x = np.asarray(samples, dtype=np.float64)
    q = np.copysign(np.floor(np.abs(x) * PCM_SCALE + 0.5), x)
    return np.clip(q, -32768, 32767).astype(np.int16)


def decode_pcm16(ints: np.ndarray) -> np.ndarray:
    return np.asarray(ints, dtype=np.float64) / PCM_SCALE


def write_wav(path, wav: Waveform) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pcm = encode_pcm16(wav.samples)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(wav.sample_rate_hz)
        fh.writeframes(pcm.tobytes())


def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono, got {fh.getnchannels()} channels")
        if fh.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit samples, got width {fh.getsampwidth()}")
        raw = fh.readframes(fh.getnframes())
        rate = fh.getframerate()
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(decode_pcm16(pcm), rate)
