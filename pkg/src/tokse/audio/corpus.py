"""Paired clean/degraded corpus generation and its manifest format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..seeding import derive_seed
from .synth import NOISE_KINDS, default_templates, noise_signal, synth_rir, synth_utterance
from .waveform import DEFAULT_SAMPLE_RATE, Waveform, write_wav

MANIFEST_NAME = "manifest.tsv"
MANIFEST_COLUMNS = ("clean_path", "degraded_path", "snr_db", "rir_id", "seed")

# Utterance lengths snap to this many samples so every analysis hop in the
# stack divides the signal exactly.
FRAME_QUANTUM = 320


@dataclass(frozen=True)
class AugmentConfig:
    """Degradation recipe: how often and how hard to corrupt the clean signal."""

    noise_prob: float = 0.8
    snr_db_range: tuple = (-5.0, 20.0)
    fixed_snr_db: float | None = None
    reverb_prob: float = 0.5
    rt60_range_s: tuple = (0.1, 0.6)
    n_rirs: int = 16

    def __post_init__(self):
        for name, p in (("noise_prob", self.noise_prob), ("reverb_prob", self.reverb_prob)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.snr_db_range[0] > self.snr_db_range[1]:
            raise ValueError(f"bad SNR range {self.snr_db_range}")
        if self.n_rirs <= 0:
            raise ValueError("need at least one room response")


@dataclass(frozen=True)
class PairRecord:
    """One manifest row; paths are relative to the manifest's directory."""

    clean_path: str
    degraded_path: str
    snr_db: float | None
    rir_id: int | None
    seed: int


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """Scale noise against the clean signal's power to hit the requested SNR."""
    if len(clean) != len(noise):
        raise ValueError(f"length mismatch: clean {len(clean)} vs noise {len(noise)}")
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise ValueError("sample rate mismatch between clean and noise")
    p_clean = clean.power()
    p_noise = noise.power()
    if p_clean <= 0.0:
        raise ValueError("clean signal has zero power; SNR is undefined")
    if p_noise <= 0.0:
        raise ValueError("noise signal has zero power; SNR is undefined")
    alpha = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return Waveform(clean.samples + alpha * noise.samples, clean.sample_rate_hz)


def apply_rir(wav: Waveform, rir: np.ndarray) -> Waveform:
    """Convolve with a room response, truncated to the input length."""
    rir = np.asarray(rir, dtype=np.float64)
    if rir.ndim != 1 or rir.size == 0:
        raise ValueError("room response must be a non-empty 1-D array")
    full = np.convolve(wav.samples, rir)
    return Waveform(full[: len(wav)], wav.sample_rate_hz)


def _snap_length(duration_s: float, sample_rate_hz: int) -> int:
    n = int(round(duration_s * sample_rate_hz))
    return max(FRAME_QUANTUM, (n // FRAME_QUANTUM) * FRAME_QUANTUM)


def make_corpus(out_dir, n_utterances: int, seed: int,
                augment: AugmentConfig | None = None,
                speakers=None,
                durations_s: tuple = (1.0,),
                noise_kinds: tuple = NOISE_KINDS,
                sample_rate_hz: int = DEFAULT_SAMPLE_RATE) -> list:
    """Render a paired corpus under out_dir and write its manifest.

    Every utterance derives its own seed from (seed, index), so records can be
    re-rendered individually and the corpus is byte-stable for a given seed.
    Returns the PairRecord list in manifest order.
    """
    if n_utterances <= 0:
        raise ValueError("n_utterances must be positive")
    augment = augment or AugmentConfig()
    speakers = speakers if speakers is not None else default_templates(seed=seed)
    out_dir = Path(out_dir)
    (out_dir / "wavs").mkdir(parents=True, exist_ok=True)

    rir_pool = []
    for j in range(augment.n_rirs):
        rt_rng = np.random.default_rng(derive_seed(seed, "rir", j))
        rt60 = rt_rng.uniform(*augment.rt60_range_s)
        rir_pool.append(synth_rir(derive_seed(seed, "rir", j, "taps"), rt60, sample_rate_hz))

    records = []
    for i in range(n_utterances):
        useed = derive_seed(seed, i)
        rng = np.random.default_rng(useed)
        template = speakers[int(rng.integers(len(speakers)))]
        duration = durations_s[int(rng.integers(len(durations_s)))]
        n = _snap_length(duration, sample_rate_hz)
        clean = synth_utterance(derive_seed(useed, "synth"), n / sample_rate_hz, template, sample_rate_hz)

        degraded = clean
        rir_id = None
        if rng.uniform() < augment.reverb_prob:
            rir_id = int(rng.integers(augment.n_rirs))
            degraded = apply_rir(degraded, rir_pool[rir_id])
        snr_db = None
        if rng.uniform() < augment.noise_prob:
            kind = noise_kinds[int(rng.integers(len(noise_kinds)))]
            noise = noise_signal(kind, n, derive_seed(useed, "noise"), sample_rate_hz)
            snr_db = augment.fixed_snr_db
            if snr_db is None:
                snr_db = float(rng.uniform(*augment.snr_db_range))
            degraded = mix_at_snr(degraded, noise, snr_db)

        peak = degraded.peak()
        if peak > 0.99:
            scale = 0.99 / peak
            degraded = Waveform(degraded.samples * scale, sample_rate_hz)
            clean = Waveform(clean.samples * scale, sample_rate_hz)

        clean_rel = f"wavs/utt_{i:05d}_clean.wav"
        degraded_rel = f"wavs/utt_{i:05d}_degraded.wav"
        write_wav(out_dir / clean_rel, clean)
        write_wav(out_dir / degraded_rel, degraded)
        records.append(PairRecord(clean_rel, degraded_rel, snr_db, rir_id, useed))

    write_manifest(out_dir / MANIFEST_NAME, records)
    meta = {"n_utterances": n_utterances, "seed": seed, "sample_rate_hz": sample_rate_hz,
            "durations_s": list(durations_s), "noise_kinds": list(noise_kinds),
            "noise_prob": augment.noise_prob, "reverb_prob": augment.reverb_prob,
            "snr_db_range": list(augment.snr_db_range), "fixed_snr_db": augment.fixed_snr_db,
            "rt60_range_s": list(augment.rt60_range_s), "n_rirs": augment.n_rirs}
    (out_dir / "corpus.json").write_text(json.dumps(meta, indent=2) + "\n")
    return records


def write_manifest(path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(MANIFEST_COLUMNS)]
    for r in records:
        snr = "none" if r.snr_db is None else f"{r.snr_db:.6f}"
        rir = "none" if r.rir_id is None else str(r.rir_id)
        lines.append(f"{r.clean_path}\t{r.degraded_path}\t{snr}\t{rir}\t{r.seed}")
    path.write_text("\n".join(lines) + "\n")


def read_manifest(path) -> list:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or tuple(lines[0].split("\t")) != MANIFEST_COLUMNS:
        raise ValueError(f"{path}: missing or malformed manifest header")
    records = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(MANIFEST_COLUMNS):
            raise ValueError(f"{path}:{ln}: expected {len(MANIFEST_COLUMNS)} columns, got {len(parts)}")
        clean_path, degraded_path, snr, rir, seed = parts
        records.append(PairRecord(clean_path, degraded_path,
                                  None if snr == "none" else float(snr),
                                  None if rir == "none" else int(rir),
                                  int(seed)))
    return records
