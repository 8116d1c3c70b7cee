"""Quantizer-side training loss."""

from __future__ import annotations

import numpy as np

from ..grad import Tensor
from ..grad.tensor import constant


def commitment_loss(z: Tensor, quantized) -> Tensor:
    """Mean over frames of the squared L2 gap between latents and their codes.

    quantized is treated as a constant: the gradient binds the encoder output
    to the codebook, never the reverse.
    """
    q = quantized.data if isinstance(quantized, Tensor) else np.asarray(quantized)
    if z.shape != q.shape:
        raise ValueError(f"latent/quantized shape mismatch: {z.shape} vs {q.shape}")
    diff = z - constant(q)
    per_frame = (diff * diff).sum(axis=-1)
    return per_frame.mean()
