"""Codec architecture and loss configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def stride_kernel(stride: int) -> int:
    """Kernel paired with a stride: 2s, plus 1 when s is odd.

    With padding (kernel - stride) // 2 a strided conv maps length L to
    exactly L/s and its transpose maps back to L*s, so token counts stay
    integral end to end.
    """
    return 2 * stride + (stride & 1)


def stride_padding(stride: int) -> int:
    return (stride_kernel(stride) - stride) // 2


@dataclass(frozen=True)
class MelScale:
    fft_size: int
    hop: int
    mel_bands: int = 40


DEFAULT_MEL_SCALES = (MelScale(256, 64), MelScale(512, 128), MelScale(1024, 256))

DISC_FFT_SIZES = (128, 256, 512)


@dataclass(frozen=True)
class LossWeights:
    lambda_rec: float = 45.0
    lambda_com: float = 0.1
    lambda_gen: float = 1.0
    lambda_fm: float = 1.0

    def __post_init__(self):
        if min(self.lambda_rec, self.lambda_com, self.lambda_gen, self.lambda_fm) < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass(frozen=True)
class CodecConfig:
    """Shapes of the encoder/decoder stack and the quantizer bottleneck.

    strides multiply to the samples-per-token rate: (2, 4, 5, 8) -> 320
    samples, 50 tokens/s at 16 kHz; (2, 4, 4, 5) -> 160, 100 tokens/s.
    """

    strides: tuple = (2, 4, 5, 8)
    channels: tuple = (24, 48, 96, 160)
    base_channels: int = 16
    latent_dim: int = 32
    group_codebook_size: int = 64
    reorg_n: int = 64
    reorg_k: int = 64
    sample_rate_hz: int = 16000
    ema_decay: float = 0.99
    mel_scales: tuple = DEFAULT_MEL_SCALES
    disc_fft_sizes: tuple = DISC_FFT_SIZES
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if len(self.strides) != len(self.channels):
            raise ValueError("need one channel width per stride")
        if any(s < 1 for s in self.strides):
            raise ValueError("strides must be >= 1")
        if self.latent_dim % 2:
            raise ValueError("latent_dim must be even for the two-group split")
        if len(self.disc_fft_sizes) < 2:
            raise ValueError("need at least two discriminator resolutions")
        if not 0.0 < self.ema_decay < 1.0:
            raise ValueError("ema_decay must sit strictly inside (0, 1)")

    @property
    def stride_product(self) -> int:
        return math.prod(self.strides)

    @property
    def tokens_per_second(self) -> float:
        return self.sample_rate_hz / self.stride_product

    @property
    def merged_codebook_size(self) -> int:
        return self.reorg_n * self.reorg_k


def bitrate_bps(tokens_per_second: float, codebook_size: int) -> float:
    """tokens/s times bits per token at the given codebook size."""
    if codebook_size < 2:
        raise ValueError("codebook must hold at least two codes")
    return tokens_per_second * math.ceil(math.log2(codebook_size))


def config_to_dict(cfg: CodecConfig) -> dict:
    """JSON-friendly snapshot; config_from_dict inverts it."""
    return {
        "strides": list(cfg.strides),
        "channels": list(cfg.channels),
        "base_channels": cfg.base_channels,
        "latent_dim": cfg.latent_dim,
        "group_codebook_size": cfg.group_codebook_size,
        "reorg_n": cfg.reorg_n,
        "reorg_k": cfg.reorg_k,
        "sample_rate_hz": cfg.sample_rate_hz,
        "ema_decay": cfg.ema_decay,
        "mel_scales": [[m.fft_size, m.hop, m.mel_bands] for m in cfg.mel_scales],
        "disc_fft_sizes": list(cfg.disc_fft_sizes),
        "weights": [cfg.weights.lambda_rec, cfg.weights.lambda_com,
                    cfg.weights.lambda_gen, cfg.weights.lambda_fm],
    }


def config_from_dict(d: dict) -> CodecConfig:
    return CodecConfig(
        strides=tuple(d["strides"]),
        channels=tuple(d["channels"]),
        base_channels=d["base_channels"],
        latent_dim=d["latent_dim"],
        group_codebook_size=d["group_codebook_size"],
        reorg_n=d["reorg_n"],
        reorg_k=d["reorg_k"],
        sample_rate_hz=d["sample_rate_hz"],
        ema_decay=d["ema_decay"],
        mel_scales=tuple(MelScale(*row) for row in d["mel_scales"]),
        disc_fft_sizes=tuple(d["disc_fft_sizes"]),
        weights=LossWeights(*d["weights"]),
    )
