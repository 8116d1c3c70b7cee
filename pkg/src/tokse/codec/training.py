"""Two-stage adversarial codec training.

Stage 1 trains the encoder/decoder around the two-book group bottleneck.
Stage 2 merges the books into one large codebook (top rows of each by usage,
all cross pairs concatenated), re-initializes only the projection layers that
touch the latent, and keeps training everything else from the stage-1 bytes.

All randomness forks off the run seed, batches are drawn from an in-memory
clip matrix, and checkpoints contain nothing wall-clock dependent, so a rerun
with the same corpus and seed reproduces the output files byte for byte.
"""

from __future__ import annotations

import csv
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..audio.corpus import MANIFEST_NAME, read_manifest
from ..audio.waveform import read_wav
from ..grad import AdamW, OptimConfig, Tensor, load_checkpoint, no_grad, save_checkpoint
from ..grad.nn import Conv1d
from ..grad.optim import TrainingDiverged
from ..seeding import derive_seed
from ..vq import Codebook, GroupQuantizer, measure_usage, reorganize, write_usage_csv
from ..vq.losses import commitment_loss
from .config import CodecConfig, config_from_dict, config_to_dict
from .losses import adv_losses, feature_match_loss, recon_loss, total_generator_loss
from .model import CodecModel, DiscriminatorBank
from .quantize import GroupStage, ReorgStage, STAGE_GROUP, STAGE_REORG

LOG_COLUMNS = ("step", "l_rec", "l_com", "l_gen", "l_fm", "l_dis", "active_fraction")

TAIL_WINDOW = 25


def load_clean_training_set(corpus_dir) -> np.ndarray:
    """Clean clips as one [N, L] float32 matrix.

    Batched training wants a rectangular array, so mixed-duration corpora are
    rejected up front instead of being silently cropped.
    """
    corpus_dir = Path(corpus_dir)
    records = read_manifest(corpus_dir / MANIFEST_NAME)
    waves = [read_wav(corpus_dir / r.clean_path) for r in records]
    lengths = {len(w) for w in waves}
    if len(lengths) != 1:
        raise ValueError(f"training clips must share one length, found {sorted(lengths)}")
    return np.stack([w.samples for w in waves]).astype(np.float32)


def _check_finite(step: int, **losses):
    for name, value in losses.items():
        if not np.isfinite(value):
            raise TrainingDiverged(f"{name} became {value} at step {step}")


def _tail_mean(values, window: int = TAIL_WINDOW):
    if not values:
        return None
    tail = values[-window:]
    return float(sum(tail) / len(tail))


def _gan_loop(data, encoder, decoder, disc, quant, cfg: CodecConfig, steps: int,
              batch_size: int, seed: int, log_path, verbose: bool = False):
    """Alternating generator/discriminator updates; returns per-step l_rec list."""
    sp = cfg.stride_product
    n, length = data.shape
    usable = (length // sp) * sp
    if usable == 0:
        raise ValueError(f"clips of {length} samples are shorter than one {sp}-sample token")
    data = data[:, :usable]

    gen_params = ([("encoder." + k, t) for k, t in encoder.named_params()]
                  + [("decoder." + k, t) for k, t in decoder.named_params()])
    opt_cfg = OptimConfig(lr=1e-4, weight_decay=0.01,
                          warmup_steps=max(1, min(100, steps // 10 or 1)))
    gen_opt = AdamW(gen_params, opt_cfg)
    disc_opt = AdamW(disc.named_params(), opt_cfg)

    batch_rng = np.random.default_rng(derive_seed(seed, "batches"))
    reseed_rng = np.random.default_rng(derive_seed(seed, "reseed"))

    recon_curve = []
    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with log_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for step in range(1, steps + 1):
            rows = batch_rng.integers(0, n, size=batch_size)
            x = data[rows]
            x_wave = Tensor(x)

            # generator update; the quantizer bottleneck is straight-through
            z = encoder(Tensor(x[:, None, :]))
            b, d, f = z.shape
            z_flat = z.transpose(0, 2, 1).reshape(b * f, d)
            _, q = quant.train_update(z_flat.data, reseed_rng)
            zq = z_flat + Tensor(q - z_flat.data)
            l_com = commitment_loss(z_flat, q)
            x_hat = decoder(zq.reshape(b, f, d).transpose(0, 2, 1)).reshape(b, usable)
            l_rec = recon_loss(x_wave, x_hat, cfg.mel_scales, cfg.sample_rate_hz)
            with no_grad():
                real_outs_ng, real_feats = disc(x_wave)
            fake_outs, fake_feats = disc(x_hat)
            l_gen = adv_losses(real_outs_ng, fake_outs)[1]
            l_fm = feature_match_loss(real_feats, fake_feats)
            total = total_generator_loss(l_rec, l_com, l_gen, l_fm, cfg.weights)
            vals = {"l_rec": l_rec.item(), "l_com": l_com.item(),
                    "l_gen": l_gen.item(), "l_fm": l_fm.item()}
            _check_finite(step, **vals)
            gen_opt.zero_grad()
            disc_opt.zero_grad()
            total.backward()
            gen_opt.step()

            # discriminator update on real vs frozen fake
            disc_opt.zero_grad()
            real_outs, _ = disc(x_wave)
            fake_outs_d, _ = disc(Tensor(x_hat.data))
            l_dis = adv_losses(real_outs, fake_outs_d)[0]
            vals["l_dis"] = l_dis.item()
            _check_finite(step, l_dis=vals["l_dis"])
            l_dis.backward()
            disc_opt.step()

            recon_curve.append(vals["l_rec"])
            writer.writerow([step, f"{vals['l_rec']:.6f}", f"{vals['l_com']:.6f}",
                             f"{vals['l_gen']:.6f}", f"{vals['l_fm']:.6f}",
                             f"{vals['l_dis']:.6f}", f"{quant.active_fraction():.6f}"])
            if step % 100 == 0:
                fh.flush()
            if verbose and (step % max(1, steps // 20) == 0 or step == steps):
                print(f"  step {step}/{steps}  l_rec {vals['l_rec']:.4f}  "
                      f"l_dis {vals['l_dis']:.4f}", flush=True)
    return recon_curve


def encode_corpus_latents(encoder, cfg: CodecConfig, data: np.ndarray,
                          chunk: int = 64) -> np.ndarray:
    """Latent frames of every clip, stacked to [N * F, d]."""
    sp = cfg.stride_product
    usable = (data.shape[1] // sp) * sp
    out = []
    with no_grad():
        for lo in range(0, data.shape[0], chunk):
            z = encoder(Tensor(data[lo: lo + chunk, None, :usable]))
            b, d, f = z.shape
            out.append(z.data.transpose(0, 2, 1).reshape(b * f, d))
    return np.concatenate(out, axis=0)


def calibrate_usage(encoder, cfg: CodecConfig, quant, data: np.ndarray) -> dict:
    """Full deterministic pass over the corpus; overwrites usage_counts.

    Reorganization and the reported active fractions both key off these
    counts, not the noisy tallies accumulated while the encoder was moving.
    """
    latents = encode_corpus_latents(encoder, cfg, data)
    if quant.stage_name == STAGE_GROUP:
        half = quant.gq.q1.dim
        r1 = measure_usage(quant.gq.q1, latents[:, :half])
        r2 = measure_usage(quant.gq.q2, latents[:, half:])
        quant.gq.q1.usage_counts[:] = r1.per_code_counts
        quant.gq.q2.usage_counts[:] = r2.per_code_counts
        return {"q1": r1, "q2": r2}
    report = measure_usage(quant.cb, latents)
    quant.cb.usage_counts[:] = report.per_code_counts
    return {"merged": report}


def _save_codec_checkpoint(path, encoder, decoder, disc, quant, meta: dict,
                           extra: dict | None = None):
    arrays = {"encoder/" + k: v for k, v in encoder.state_arrays().items()}
    arrays.update({"decoder/" + k: v for k, v in decoder.state_arrays().items()})
    arrays.update({"disc/" + k: v for k, v in disc.state_arrays().items()})
    arrays.update(quant.state_arrays("quant/"))
    if extra:
        arrays.update(extra)
    save_checkpoint(path, arrays, meta)


def train_stage1(corpus_dir, out_dir, cfg: CodecConfig | None = None, steps: int = 2000,
                 batch_size: int = 4, seed: int = 0, verbose: bool = False) -> dict:
    """Train the group-bottleneck codec; writes checkpoint, log, and usage CSVs."""
    cfg = cfg or CodecConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = load_clean_training_set(corpus_dir)

    model = CodecModel.init(seed, cfg, None)
    disc = DiscriminatorBank(np.random.default_rng(derive_seed(seed, "disc")), cfg)
    half = cfg.latent_dim // 2
    book_rng = np.random.default_rng(derive_seed(seed, "codebooks"))
    quant = GroupStage(GroupQuantizer(
        Codebook.init_random(book_rng, cfg.group_codebook_size, half),
        Codebook.init_random(book_rng, cfg.group_codebook_size, half)), cfg.ema_decay)
    model.quantizer = quant

    t0 = time.perf_counter()
    log_path = out_dir / "codec_stage1_log.csv"
    curve = _gan_loop(data, model.encoder, model.decoder, disc, quant, cfg, steps,
                      batch_size, seed, log_path, verbose)
    wall_s = time.perf_counter() - t0

    reports = calibrate_usage(model.encoder, cfg, quant, data)
    write_usage_csv(out_dir / "codec_stage1_usage_q1.csv", reports["q1"])
    write_usage_csv(out_dir / "codec_stage1_usage_q2.csv", reports["q2"])

    final_recon = _tail_mean(curve)
    meta = {"kind": "codec", "stage": STAGE_GROUP, "config": config_to_dict(cfg),
            "seed": seed, "steps": steps, "batch_size": batch_size,
            "final_recon": final_recon}
    ckpt = out_dir / "codec_stage1.ckpt"
    _save_codec_checkpoint(ckpt, model.encoder, model.decoder, disc, quant, meta)
    return {"checkpoint": ckpt, "log": log_path, "final_recon": final_recon,
            "steps": steps, "wall_s": wall_s,
            "active_fraction": 0.5 * (reports["q1"].active_fraction
                                      + reports["q2"].active_fraction)}


def train_stage2(stage1_ckpt, corpus_dir, out_dir, steps: int = 500,
                 batch_size: int = 4, seed: int = 0, verbose: bool = False) -> dict:
    """Reorganize the stage-1 books and keep training the merged codec.

    Everything except the two latent projections continues from the stage-1
    bytes; the discriminators are carried over rather than re-initialized.
    """
    arrays, meta = load_checkpoint(stage1_ckpt)
    if meta.get("kind") != "codec" or meta.get("stage") != STAGE_GROUP:
        raise ValueError(f"{stage1_ckpt} is not a group-stage codec checkpoint")
    cfg = config_from_dict(meta["config"])
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = load_clean_training_set(corpus_dir)

    model = CodecModel.init(seed, cfg, None)
    model.encoder.load_state_arrays(arrays, "encoder/")
    model.decoder.load_state_arrays(arrays, "decoder/")
    disc = DiscriminatorBank(np.random.default_rng(derive_seed(seed, "disc")), cfg)
    disc.load_state_arrays(arrays, "disc/")

    proj_rng = np.random.default_rng(derive_seed(seed, "stage2-proj"))
    model.encoder.proj = Conv1d(proj_rng, cfg.channels[-1], cfg.latent_dim, 3, padding=1)
    model.decoder.proj = Conv1d(proj_rng, cfg.latent_dim, cfg.channels[-1], 3, padding=1)

    stage1_quant = GroupStage.from_state(arrays, cfg.ema_decay, "quant/")
    merged, remap = reorganize(stage1_quant.gq, stage1_quant.gq.q1.usage_counts,
                               stage1_quant.gq.q2.usage_counts, cfg.reorg_n, cfg.reorg_k)
    quant = ReorgStage(merged, cfg.ema_decay)
    model.quantizer = quant

    t0 = time.perf_counter()
    log_path = out_dir / "codec_stage2_log.csv"
    curve = _gan_loop(data, model.encoder, model.decoder, disc, quant, cfg, steps,
                      batch_size, seed, log_path, verbose)
    wall_s = time.perf_counter() - t0

    reports = calibrate_usage(model.encoder, cfg, quant, data)
    write_usage_csv(out_dir / "codec_stage2_usage.csv", reports["merged"])

    final_recon = _tail_mean(curve)
    meta2 = {"kind": "codec", "stage": STAGE_REORG, "config": config_to_dict(cfg),
             "seed": seed, "steps": steps, "batch_size": batch_size,
             "final_recon": final_recon, "disc_carryover": True,
             "stage1_steps": meta["steps"], "stage1_final_recon": meta["final_recon"]}
    ckpt = out_dir / "codec_stage2.ckpt"
    _save_codec_checkpoint(ckpt, model.encoder, model.decoder, disc, quant, meta2,
                           extra={"remap": remap})
    return {"checkpoint": ckpt, "log": log_path, "final_recon": final_recon,
            "steps": steps, "wall_s": wall_s,
            "active_fraction": reports["merged"].active_fraction}


def reorganize_checkpoint(stage1_ckpt, out_path, n: int | None = None,
                          k: int | None = None) -> dict:
    """Merge a group-stage checkpoint's two books into one n*k codebook.

    Pure bookkeeping, no training: encoder, decoder, and discriminator
    weights are copied byte for byte and only the quantizer is replaced, so
    the output is a merged-stage checkpoint ready for inspection or further
    training. n and k default to the checkpoint's configured shape.
    """
    arrays, meta = load_checkpoint(stage1_ckpt)
    if meta.get("kind") != "codec" or meta.get("stage") != STAGE_GROUP:
        raise ValueError(f"{stage1_ckpt} is not a group-stage codec checkpoint")
    cfg = config_from_dict(meta["config"])
    n = cfg.reorg_n if n is None else n
    k = cfg.reorg_k if k is None else k
    cfg = replace(cfg, reorg_n=n, reorg_k=k)

    stage1_quant = GroupStage.from_state(arrays, cfg.ema_decay, "quant/")
    merged, remap = reorganize(stage1_quant.gq, stage1_quant.gq.q1.usage_counts,
                               stage1_quant.gq.q2.usage_counts, n, k)
    quant = ReorgStage(merged, cfg.ema_decay)

    new_arrays = {key: val for key, val in arrays.items()
                  if not key.startswith("quant/") and key != "remap"}
    new_arrays.update(quant.state_arrays("quant/"))
    new_arrays["remap"] = remap
    meta2 = {"kind": "codec", "stage": STAGE_REORG, "config": config_to_dict(cfg),
             "seed": meta.get("seed", 0), "steps": 0, "batch_size": 0,
             "final_recon": meta.get("final_recon"), "disc_carryover": True,
             "stage1_steps": meta["steps"], "stage1_final_recon": meta["final_recon"]}
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_path, new_arrays, meta2)
    return {"checkpoint": out_path, "codebook_size": merged.size,
            "n": n, "k": k}


def load_codec(ckpt_path):
    """Rebuild a CodecModel for inference; returns (model, meta)."""
    arrays, meta = load_checkpoint(ckpt_path)
    if meta.get("kind") != "codec":
        raise ValueError(f"{ckpt_path} is not a codec checkpoint")
    cfg = config_from_dict(meta["config"])
    if meta["stage"] == STAGE_GROUP:
        quant = GroupStage.from_state(arrays, cfg.ema_decay, "quant/")
    elif meta["stage"] == STAGE_REORG:
        quant = ReorgStage.from_state(arrays, cfg.ema_decay, "quant/")
    else:
        raise ValueError(f"unknown codec stage {meta['stage']!r}")
    model = CodecModel.init(meta.get("seed", 0), cfg, quant)
    model.encoder.load_state_arrays(arrays, "encoder/")
    model.decoder.load_state_arrays(arrays, "decoder/")
    return model, meta


def read_log_column(log_path, column: str) -> np.ndarray:
    """One numeric column of a training log, in step order."""
    with Path(log_path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if column not in (reader.fieldnames or ()):
            raise ValueError(f"{log_path} has no column {column!r}")
        return np.array([float(row[column]) for row in reader])
