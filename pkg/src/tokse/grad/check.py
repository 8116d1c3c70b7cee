"""Central finite-difference verification of backward passes."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def grad_check(fn, params, eps: float = 1e-5) -> float:
    """Max relative error between backward() and central differences.

    fn rebuilds the forward graph from params (float64 recommended) and
    returns the scalar loss tensor. Relative error per coordinate uses
    denominator max(|analytic|, |numeric|, 1e-8).
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = fn()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        ana_flat = ana.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = fn().item()
            flat[i] = orig - eps
            f_minus = fn().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(ana_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(ana_flat[i] - numeric) / denom)
    return worst
