"""Experiments behind the quality and usage claims: codebook-usage sweeps,
training-curve attainment, denoising-LM probes, and corpus evaluation of
the codec and the enhancement chain.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..audio import read_manifest, read_wav
from ..lm import (ROLE_CLEAN_SEM, LmConfig, TokenLm, VocabLayout,
                  build_n2s_sequence, masked_accuracy, substitute_tokens,
                  train_lm)
from ..pipeline import BundleError, StageError, enhance_detailed
from ..seeding import derive_seed
from ..vq import Codebook, measure_usage, quantize_nearest, update_ema
from .metrics import lsd, lsd_trimmed, mcd, si_snr, timbre_correlation, token_accuracy
from .report import MetricReport

SWEEP_COLUMNS = ("codebook_size", "active_fraction", "recon_proxy")


def encoder_latents(codec, waves) -> np.ndarray:
    """Frozen-encoder latents of a list of waveforms, stacked to [F, d]."""
    return np.concatenate([codec.encode_latents(w) for w in waves])


def train_direct_codebook(latents: np.ndarray, size: int, steps: int = 200,
                          batch: int = 1024, decay: float = 0.99,
                          seed: int = 0) -> Codebook:
    """EMA-train one flat codebook of the given size on fixed latents.

    Entries start on randomly drawn data rows and dead codes are never
    re-seeded, so usage decay with size is visible rather than patched up.
    """
    latents = np.asarray(latents, dtype=np.float32)
    if latents.ndim != 2 or latents.shape[0] == 0:
        raise ValueError("latents must be a nonempty [F, d] array")
    rng = np.random.default_rng(seed)
    n = latents.shape[0]
    rows = rng.choice(n, size=size, replace=n < size)
    cb = Codebook.init_random(rng, size, latents.shape[1])
    cb.entries[:] = latents[rows]
    for _ in range(steps):
        pick = rng.integers(0, n, size=batch)
        vectors = latents[pick]
        idx, _, _ = quantize_nearest(cb, vectors)
        update_ema(cb, idx, vectors, decay, rng=None)
    return cb


def _mean_sq_error(cb: Codebook, latents: np.ndarray, chunk: int = 8192) -> float:
    total, count = 0.0, 0
    for lo in range(0, latents.shape[0], chunk):
        _, _, sq = quantize_nearest(cb, latents[lo: lo + chunk])
        total += float(sq.sum())
        count += sq.shape[0]
    return total / count


def usage_sweep(latents: np.ndarray, sizes, steps: int = 200, batch: int = 1024,
                decay: float = 0.99, seed: int = 0, csv_path=None,
                svg_path=None) -> list:
    """Direct-training sweep over codebook sizes at one fixed budget.

    Returns one dict per size: codebook_size, active_fraction (fraction of
    entries used at least once on a full pass), and recon_proxy (mean
    squared quantization error).
    """
    if not sizes:
        raise ValueError("need at least one codebook size")
    rows = []
    for size in sizes:
        cb = train_direct_codebook(latents, int(size), steps=steps, batch=batch,
                                   decay=decay, seed=derive_seed(seed, "sweep", int(size)))
        usage = measure_usage(cb, latents)
        rows.append({"codebook_size": int(size),
                     "active_fraction": usage.active_fraction,
                     "recon_proxy": _mean_sq_error(cb, latents)})
    if csv_path is not None:
        write_sweep_csv(csv_path, rows)
    if svg_path is not None:
        write_sweep_svg(svg_path, rows)
    return rows


def write_sweep_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def read_sweep_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{"codebook_size": int(r["codebook_size"]),
                 "active_fraction": float(r["active_fraction"]),
                 "recon_proxy": float(r["recon_proxy"])}
                for r in csv.DictReader(fh)]


def write_sweep_svg(path, rows, width: int = 520, height: int = 340):
    """Usage-versus-size line plot as a standalone SVG file."""
    pad = 50
    xs = [float(np.log2(r["codebook_size"])) for r in rows]
    ys = [r["active_fraction"] for r in rows]
    x_lo, x_hi = min(xs), max(xs)
    span = (x_hi - x_lo) or 1.0

    def px(x):
        return pad + (x - x_lo) / span * (width - 2 * pad)

    def py(y):
        return height - pad - y * (height - 2 * pad)

    points = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys))
    labels = "".join(
        f'<text x="{px(x):.1f}" y="{height - pad + 16}" font-size="11" '
        f'text-anchor="middle">{r["codebook_size"]}</text>'
        for x, r in zip(xs, rows))
    ticks = "".join(
        f'<text x="{pad - 8}" y="{py(v) + 4:.1f}" font-size="11" '
        f'text-anchor="end">{v:.1f}</text>' for v in (0.0, 0.5, 1.0))
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
        f'<rect width="100%" height="100%" fill="white"/>'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>'
        f'<polyline points="{points}" fill="none" stroke="#1f77b4" stroke-width="2"/>'
        + "".join(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="#1f77b4"/>'
                  for x, y in zip(xs, ys))
        + labels + ticks
        + f'<text x="{width / 2:.0f}" y="{height - 8}" font-size="12" '
          f'text-anchor="middle">codebook size</text>'
        + f'<text x="14" y="{height / 2:.0f}" font-size="12" text-anchor="middle" '
          f'transform="rotate(-90 14 {height / 2:.0f})">active fraction</text>'
        '</svg>')
    Path(path).write_text(svg, encoding="utf-8")


def steps_to_reach(log_csv, target: float, column: str = "l_rec",
                   window: int = 25):
    """First logged step whose trailing-window mean is at or below target.

    Returns None when the curve never gets there. The window matches the
    trailing mean used to define a run's final loss.
    """
    steps, values = [], []
    with open(log_csv, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            steps.append(int(float(row["step"])))
            values.append(float(row[column]))
    if not steps:
        raise ValueError(f"{log_csv} holds no rows")
    for i in range(len(values)):
        lo = max(0, i + 1 - window)
        if float(np.mean(values[lo: i + 1])) <= target:
            return steps[i]
    return None


def substitution_experiment(clean_streams, k: int, rate: float = 0.3,
                            holdout: float = 0.2, seed: int = 0,
                            steps: int = 600, batch_size: int = 8,
                            n_layers: int = 4, n_heads: int = 4, dim: int = 128,
                            lr: float = 3e-4, verbose: bool = False) -> dict:
    """Denoising probe: corrupt clean token streams by uniform substitution,
    train a fresh sequence-to-sequence LM to restore them, and compare its
    held-out accuracy on the restored positions against the identity
    baseline (emit the corrupted input unchanged).

    Substituted tokens always differ from the original, so the identity
    baseline equals the uncorrupted fraction (1 - rate in expectation).
    """
    streams = [np.asarray(s, dtype=np.int64) for s in clean_streams]
    if len(streams) < 5:
        raise ValueError("need at least five streams to carve out a holdout")
    rng = np.random.default_rng(derive_seed(seed, "corrupt"))
    corrupted = [substitute_tokens(s, rate, k, rng) for s in streams]

    layout = VocabLayout(k, 1)  # no acoustic stream in this probe
    samples = [build_n2s_sequence(c, s, layout)
               for c, s in zip(corrupted, streams)]
    n_hold = max(1, round(holdout * len(samples)))
    train, held = samples[:-n_hold], samples[-n_hold:]

    longest = max(len(s) for s in samples)
    cfg = LmConfig(vocab_size=layout.vocab_size, n_layers=n_layers,
                   n_heads=n_heads, dim=dim, context=longest)
    model = TokenLm.init(cfg, derive_seed(seed, "model"))
    result = train_lm(model, train, layout, steps=steps, batch_size=batch_size,
                      seed=derive_seed(seed, "train"), lr=lr, verbose=verbose)

    hits = total = ident_hits = ident_total = 0
    for sample, clean, corrupt in zip(held, streams[-n_hold:], corrupted[-n_hold:]):
        sem_mask = sample.loss_mask & (sample.roles == ROLE_CLEAN_SEM)
        logits = model(sample.tokens[None, :]).data
        acc = masked_accuracy(logits, sample.tokens[None, :], sem_mask[None, :])
        hits += acc * sem_mask.sum()
        total += sem_mask.sum()
        ident_hits += int((clean == corrupt).sum())
        ident_total += clean.size
    return {"model_accuracy": float(hits / total),
            "identity_accuracy": float(ident_hits / ident_total),
            "substitution_rate": rate,
            "n_train": len(train), "n_holdout": len(held),
            "train_final_loss": result["final_loss"],
            "train_final_accuracy": result["final_accuracy"]}


def _utterance_id(rec) -> str:
    stem = Path(rec.clean_path).stem
    return stem[:-len("_clean")] if stem.endswith("_clean") else stem


def evaluate_codec(codec, corpus_dir, limit=None) -> MetricReport:
    """Round-trip the clean side of a corpus through the codec."""
    corpus_dir = Path(corpus_dir)
    records = read_manifest(corpus_dir / "manifest.tsv")[:limit]
    report = MetricReport()
    for rec in records:
        clean = read_wav(corpus_dir / rec.clean_path)
        ids = codec.encode(clean)
        out = codec.decode(ids)
        report.add(utterance=_utterance_id(rec),
                   lsd_db=lsd(clean, out),
                   mcd_db=mcd(clean, out),
                   si_snr_db=si_snr(clean, out),
                   token_accuracy=token_accuracy(ids, codec.encode(out)))
    return report


def evaluate_enhancement(bundle, corpus_dir, mode: str = "full",
                         sampling: str = "greedy", top_k: int = 16,
                         temperature: float = 0.8, rng=None,
                         limit=None) -> MetricReport:
    """Enhance every degraded utterance and score it against its clean
    reference. A stage failure marks the record failed instead of aborting
    the sweep; failed utterances count as not improved.
    """
    corpus_dir = Path(corpus_dir)
    records = read_manifest(corpus_dir / "manifest.tsv")[:limit]
    report = MetricReport()
    for rec in records:
        clean = read_wav(corpus_dir / rec.clean_path)
        noisy = read_wav(corpus_dir / rec.degraded_path)
        row = {"utterance": _utterance_id(rec), "mode": mode,
               "lsd_noisy_db": lsd(clean, noisy)}
        try:
            result = enhance_detailed(noisy, bundle, mode=mode, sampling=sampling,
                                      top_k=top_k, temperature=temperature, rng=rng)
            row["lsd_enhanced_db"] = lsd_trimmed(clean, result.wave)
            row["timbre_corr"] = timbre_correlation(result.wave, clean)
            row["improved"] = row["lsd_enhanced_db"] < row["lsd_noisy_db"]
            row["failed"] = False
        except (StageError, BundleError, ValueError) as exc:
            row.update(lsd_enhanced_db=None, timbre_corr=None,
                       improved=False, failed=True, error=str(exc))
        report.add(**row)
    return report
