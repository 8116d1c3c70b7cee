"""Convolutional encoder/decoder pair and the spectral discriminator bank."""

from __future__ import annotations

import numpy as np

from ..audio.waveform import Waveform
from ..grad import Tensor, no_grad, ops
from ..grad.nn import Conv1d, ConvTranspose1d, Layer
from ..seeding import derive_seed
from .config import CodecConfig, stride_kernel, stride_padding
from .losses import log_spectrogram_in_graph


class Encoder(Layer):
    """Waveform [B, 1, L] down to latent frames [B, d, L / stride_product]."""

    def __init__(self, rng: np.random.Generator, cfg: CodecConfig):
        self.head = Conv1d(rng, 1, cfg.base_channels, 7, padding=3)
        self.blocks = []
        c_prev = cfg.base_channels
        for s, c in zip(cfg.strides, cfg.channels):
            self.blocks.append(Conv1d(rng, c_prev, c, stride_kernel(s), stride=s,
                                      padding=stride_padding(s)))
            c_prev = c
        self.proj = Conv1d(rng, c_prev, cfg.latent_dim, 3, padding=1)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.head(x)
        for block in self.blocks:
            h = block(ops.elu(h))
        return self.proj(ops.elu(h))


class Decoder(Layer):
    """Latent frames [B, d, F] back to a waveform [B, 1, F * stride_product]."""

    def __init__(self, rng: np.random.Generator, cfg: CodecConfig):
        self.proj = Conv1d(rng, cfg.latent_dim, cfg.channels[-1], 3, padding=1)
        self.blocks = []
        widths = (cfg.base_channels,) + tuple(cfg.channels[:-1])
        for s, c_in, c_out in zip(reversed(cfg.strides), reversed(cfg.channels), reversed(widths)):
            self.blocks.append(ConvTranspose1d(rng, c_in, c_out, stride_kernel(s), stride=s,
                                               padding=stride_padding(s)))
        self.tail = Conv1d(rng, cfg.base_channels, 1, 7, padding=3)

    def __call__(self, z: Tensor) -> Tensor:
        h = self.proj(z)
        for block in self.blocks:
            h = block(ops.elu(h))
        return ops.tanh(self.tail(ops.elu(h)))


class Discriminator(Layer):
    """Small conv stack over one log-spectrogram resolution.

    Returns (output map, [layer features]) so the adversarial and
    feature-matching losses share a single forward pass.
    """

    WIDTH = 32

    def __init__(self, rng: np.random.Generator, fft_size: int):
        self.fft_size = fft_size
        self.hop = fft_size // 4
        bins = fft_size // 2 + 1
        w = self.WIDTH
        self.convs = [
            Conv1d(rng, bins, w, 3, padding=1),
            Conv1d(rng, w, w, 3, stride=2, padding=1),
            Conv1d(rng, w, w, 3, stride=2, padding=1),
        ]
        self.out = Conv1d(rng, w, 1, 3, padding=1)

    def __call__(self, wave: Tensor):
        spec = log_spectrogram_in_graph(wave, self.fft_size, self.hop)  # [B, bins, F]
        feats = []
        h = spec
        for conv in self.convs:
            h = ops.elu(conv(h))
            feats.append(h)
        return self.out(h), feats


class DiscriminatorBank(Layer):
    def __init__(self, rng: np.random.Generator, cfg: CodecConfig):
        self.discs = [Discriminator(rng, n) for n in cfg.disc_fft_sizes]

    def __call__(self, wave: Tensor):
        """Returns parallel lists: outputs per resolution, features per resolution."""
        outs, feats = [], []
        for disc in self.discs:
            o, f = disc(wave)
            outs.append(o)
            feats.append(f)
        return outs, feats


class CodecModel:
    """Encoder, decoder, and quantizer wired together for inference.

    quantizer is anything with quantize(latents [F, d]) -> (tokens, quantized)
    and a codebook_size; training supplies the stage-specific one.
    """

    def __init__(self, cfg: CodecConfig, encoder: Encoder, decoder: Decoder, quantizer):
        self.cfg = cfg
        self.encoder = encoder
        self.decoder = decoder
        self.quantizer = quantizer

    @classmethod
    def init(cls, seed: int, cfg: CodecConfig, quantizer) -> "CodecModel":
        enc_rng = np.random.default_rng(derive_seed(seed, "encoder"))
        dec_rng = np.random.default_rng(derive_seed(seed, "decoder"))
        return cls(cfg, Encoder(enc_rng, cfg), Decoder(dec_rng, cfg), quantizer)

    def encode_latents(self, wave: Waveform) -> np.ndarray:
        """Latent frames [F, d]; F = floor(len / stride_product)."""
        sp = self.cfg.stride_product
        if len(wave) < sp:
            raise ValueError(f"waveform of {len(wave)} samples is shorter than one {sp}-sample token")
        usable = (len(wave) // sp) * sp
        x = wave.samples[:usable].astype(np.float32)[None, None, :]
        with no_grad():
            z = self.encoder(Tensor(x))
        return z.data[0].T.copy()  # [F, d]

    def encode(self, wave: Waveform) -> np.ndarray:
        """Acoustic token ids [F]."""
        tokens, _ = self.quantizer.quantize(self.encode_latents(wave))
        return tokens

    def decode_latents(self, latents: np.ndarray) -> Waveform:
        z = np.asarray(latents, dtype=np.float32)
        if z.ndim != 2 or z.shape[1] != self.cfg.latent_dim:
            raise ValueError(f"expected [F, {self.cfg.latent_dim}] latents, got {z.shape}")
        with no_grad():
            x = self.decoder(Tensor(z.T[None]))
        return Waveform(x.data[0, 0].astype(np.float64), self.cfg.sample_rate_hz)

    def decode(self, tokens: np.ndarray) -> Waveform:
        tokens = np.asarray(tokens, dtype=np.int64)
        size = self.quantizer.codebook_size
        bad = np.flatnonzero((tokens < 0) | (tokens >= size))
        if bad.size:
            raise ValueError(f"token at position {bad[0]} is {tokens[bad[0]]}, outside [0, {size})")
        return self.decode_latents(self.quantizer.embed(tokens))

    def roundtrip(self, wave: Waveform) -> Waveform:
        return self.decode(self.encode(wave))
