"""Staged training plan: codec stage 1, reorganize + stage 2, k-means
vocabulary, then the token LMs (plus the two ablation LMs used by eval).

Every stage is skipped when its artifact already exists, so an interrupted
plan resumes where it stopped. All randomness forks off one plan seed. Wall
times go only to the plan log; checkpoints, config snapshot, and provenance
carry nothing run-specific (no paths, no clocks), so two runs of the same
plan produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..audio import read_manifest, read_wav
from ..codec import (CodecConfig, config_from_dict, config_to_dict, load_codec,
                     train_stage1, train_stage2)
from ..lm import (LmConfig, TokenLm, VocabLayout, build_n2s_sequence,
                  build_s2s_sequence, build_single_lm_sequence, save_lm,
                  train_lm)
from ..seeding import derive_seed
from ..semantic import (FeatureConfig, extract_features, fit_feature_stats,
                        fit_kmeans, load_vocab, save_vocab, tokenize)
from .bundle import (CODEC_STAGE1, CODEC_STAGE2, CONFIG_SNAPSHOT,
                     N2S_CHECKPOINT, PLAN_LOG, PROVENANCE, S2S_CHECKPOINT,
                     S2S_NO_CHAIN_CHECKPOINT, SEMANTIC_VOCAB,
                     SINGLE_LM_CHECKPOINT, load_bundle)

MANIFEST_NAME = "manifest.tsv"


class PlanError(RuntimeError):
    """A stage prerequisite is missing or the plan directory is inconsistent."""


@dataclass(frozen=True)
class PlanConfig:
    corpus_dir: str
    out_dir: str
    seed: int = 0
    codec: CodecConfig = field(default_factory=CodecConfig)
    stage1_steps: int = 2000
    stage1_batch: int = 4
    stage2_steps: int = 500
    stage2_batch: int = 4
    kmeans_k: int = 64
    kmeans_iters: int = 50
    lm_layers: int = 4
    lm_heads: int = 4
    lm_dim: int = 128
    lm_context: int = 1024
    lm_dropout: float = 0.0
    single_lm_layers: int = 8
    n2s_steps: int = 1500
    s2s_steps: int = 1200
    lm_batch: int = 8
    lm_lr: float = 3e-4
    train_ablations: bool = True

    def __post_init__(self):
        if min(self.stage1_steps, self.stage2_steps, self.n2s_steps,
               self.s2s_steps) < 1:
            raise ValueError("every stage needs at least one step")
        if self.kmeans_k < 1:
            raise ValueError("kmeans_k must be positive")

    def lm_config(self, vocab_size: int, n_layers: int | None = None) -> LmConfig:
        return LmConfig(vocab_size=vocab_size,
                        n_layers=self.lm_layers if n_layers is None else n_layers,
                        n_heads=self.lm_heads, dim=self.lm_dim,
                        context=self.lm_context, dropout=self.lm_dropout)


def plan_to_dict(plan: PlanConfig) -> dict:
    """Snapshot without the two path fields: where a plan ran is not part of
    what it computed, and paths would break byte comparison across reruns."""
    d = {k: v for k, v in vars(plan).items() if k not in ("corpus_dir", "out_dir")}
    d["codec"] = config_to_dict(plan.codec)
    return d


def plan_from_dict(d: dict, corpus_dir, out_dir) -> PlanConfig:
    d = dict(d)
    codec = config_from_dict(d.pop("codec")) if "codec" in d else CodecConfig()
    known = {k for k in PlanConfig.__dataclass_fields__
             if k not in ("corpus_dir", "out_dir", "codec")}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown plan config keys: {sorted(unknown)}")
    return PlanConfig(corpus_dir=str(corpus_dir), out_dir=str(out_dir),
                      codec=codec, **d)


def corpus_fingerprint(corpus_dir) -> str:
    """Stable hash of the corpus identity (manifest + generation metadata)."""
    corpus_dir = Path(corpus_dir)
    h = hashlib.blake2b(digest_size=16)
    manifest = corpus_dir / MANIFEST_NAME
    if not manifest.exists():
        raise PlanError(f"no corpus manifest at {manifest}")
    h.update(manifest.read_bytes())
    meta = corpus_dir / "corpus.json"
    if meta.exists():
        h.update(meta.read_bytes())
    return h.hexdigest()


def _load_pairs(corpus_dir):
    corpus_dir = Path(corpus_dir)
    records = read_manifest(corpus_dir / MANIFEST_NAME)
    return [(read_wav(corpus_dir / r.clean_path),
             read_wav(corpus_dir / r.degraded_path)) for r in records]


def semantic_token_pairs(pairs, vocab):
    """[(noisy ids, clean ids)] per (clean, degraded) waveform pair."""
    return [(tokenize(deg, vocab).ids, tokenize(clean, vocab).ids)
            for clean, deg in pairs]


def acoustic_token_pairs(pairs, codec):
    """[(noisy ids, clean ids)] through the trained codec's quantizer."""
    return [(codec.encode(deg), codec.encode(clean)) for clean, deg in pairs]


_LM_PREREQS = [("semantic vocabulary", SEMANTIC_VOCAB),
               ("stage-2 codec", CODEC_STAGE2)]
_STAGE_ARTIFACTS = {
    "stage1": CODEC_STAGE1, "stage2": CODEC_STAGE2, "kmeans": SEMANTIC_VOCAB,
    "n2s": N2S_CHECKPOINT, "s2s": S2S_CHECKPOINT,
    "s2s_no_chain": S2S_NO_CHAIN_CHECKPOINT, "single_lm": SINGLE_LM_CHECKPOINT,
}
_STAGE_PREREQS = {
    "stage1": [], "kmeans": [],
    "stage2": [("stage-1 codec", CODEC_STAGE1)],
    "n2s": [("semantic vocabulary", SEMANTIC_VOCAB)],
    "s2s": _LM_PREREQS, "s2s_no_chain": _LM_PREREQS, "single_lm": _LM_PREREQS,
}


def stage_names(plan: PlanConfig) -> tuple:
    base = ("stage1", "stage2", "kmeans", "n2s", "s2s")
    return base + (("s2s_no_chain", "single_lm") if plan.train_ablations else ())


def stage_artifact(name: str) -> str:
    """Filename (relative to the plan's out_dir) a stage writes."""
    if name not in _STAGE_ARTIFACTS:
        raise PlanError(f"unknown stage {name!r}; stages are {sorted(_STAGE_ARTIFACTS)}")
    return _STAGE_ARTIFACTS[name]


def run_stage(plan: PlanConfig, name: str, verbose: bool = False,
              _shared: dict | None = None) -> dict:
    """Run one stage, skipping when its artifact already exists.

    Raises PlanError when a prerequisite artifact is missing, so an LM can
    never train before the stages that make its token inputs.
    """
    if name not in _STAGE_ARTIFACTS:
        raise PlanError(f"unknown stage {name!r}; stages are {sorted(_STAGE_ARTIFACTS)}")
    out = Path(plan.out_dir)
    artifact = out / _STAGE_ARTIFACTS[name]
    if artifact.exists():
        return {"skipped": True, "artifact": str(artifact)}
    for what, filename in _STAGE_PREREQS[name]:
        if not (out / filename).exists():
            raise PlanError(f"stage '{name}' needs the {what} artifact "
                            f"{filename}, which is missing; run its stage first")
    shared = _shared if _shared is not None else {}
    if name == "stage1":
        summary = _run_stage1(plan, Path(plan.corpus_dir), out, verbose)
    elif name == "stage2":
        summary = _run_stage2(plan, Path(plan.corpus_dir), out, verbose)
    elif name == "kmeans":
        summary = _run_kmeans(plan, _shared_pairs(plan, shared))
    else:
        summary = _run_lm_stage(plan, name, out, _shared_pairs(plan, shared),
                                shared, verbose)
    summary["artifact"] = str(artifact)
    return summary


def _shared_pairs(plan, shared: dict):
    if "pairs" not in shared:
        shared["pairs"] = _load_pairs(plan.corpus_dir)
    return shared["pairs"]


def run_training_plan(plan: PlanConfig, verbose: bool = False) -> dict:
    """Execute (or resume) every stage; returns per-stage summaries.

    The finished directory is loadable with load_bundle.
    """
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fingerprint = corpus_fingerprint(plan.corpus_dir)

    snapshot = json.dumps(plan_to_dict(plan), indent=2, sort_keys=True) + "\n"
    snap_path = out / CONFIG_SNAPSHOT
    if snap_path.exists():
        if snap_path.read_text() != snapshot:
            raise PlanError(f"{snap_path} holds a different plan config; "
                            "resume needs a matching config or a fresh out_dir")
    else:
        snap_path.write_text(snapshot)

    prov_path = out / PROVENANCE
    old_stages = (json.loads(prov_path.read_text()).get("stages", {})
                  if prov_path.exists() else {})

    results: dict = {}
    shared: dict = {}  # corpus pairs and token streams, shared across stages
    with open(out / PLAN_LOG, "a") as log_file:
        def log(line: str):
            log_file.write(line + "\n")
            log_file.flush()
            if verbose:
                print(line)

        for name in stage_names(plan):
            t0 = time.monotonic()
            summary = run_stage(plan, name, verbose=verbose, _shared=shared)
            results[name] = summary
            if summary.get("skipped"):
                log(f"{name}: skipped (artifact exists)")
                continue
            shown = {k: v for k, v in summary.items()
                     if k in ("final_recon", "final_loss", "final_accuracy", "steps")}
            log(f"{name}: wall={time.monotonic() - t0:.1f}s "
                f"{json.dumps(shown, sort_keys=True)}")

    kept = ("steps", "final_recon", "final_loss", "final_accuracy",
            "k", "frames", "skipped")
    stages = {}
    for name, info in results.items():
        old = old_stages.get(name)
        if info.get("skipped") and old and not old.get("skipped"):
            stages[name] = old  # keep the numbers from the run that made it
        else:
            stages[name] = {k: v for k, v in info.items() if k in kept}
    provenance = {"plan_seed": plan.seed, "corpus_fingerprint": fingerprint,
                  "stages": stages}
    prov_path.write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    return results


def _run_stage1(plan, corpus_dir, out, verbose):
    r = train_stage1(corpus_dir, out, cfg=plan.codec, steps=plan.stage1_steps,
                     batch_size=plan.stage1_batch,
                     seed=derive_seed(plan.seed, "stage1"), verbose=verbose)
    return {"steps": r["steps"], "final_recon": r["final_recon"]}


def _run_stage2(plan, corpus_dir, out, verbose):
    r = train_stage2(out / CODEC_STAGE1, corpus_dir, out, steps=plan.stage2_steps,
                     batch_size=plan.stage2_batch,
                     seed=derive_seed(plan.seed, "stage2"), verbose=verbose)
    return {"steps": r["steps"], "final_recon": r["final_recon"]}


def _run_kmeans(plan, pairs):
    waves = [w for pair in pairs for w in pair]
    fcfg = FeatureConfig(sample_rate_hz=plan.codec.sample_rate_hz)
    stats = fit_feature_stats(waves, fcfg)
    feats = np.concatenate([extract_features(w, fcfg, stats) for w in waves])
    vocab = fit_kmeans(feats, plan.kmeans_k, iters=plan.kmeans_iters,
                       seed=derive_seed(plan.seed, "kmeans"), stats=stats,
                       feature_config=fcfg)
    save_vocab(Path(plan.out_dir) / SEMANTIC_VOCAB, vocab)
    return {"k": plan.kmeans_k, "frames": int(feats.shape[0])}


def _run_lm_stage(plan, name, out, pairs, token_cache, verbose):
    if "sem" not in token_cache:
        token_cache["sem"] = semantic_token_pairs(pairs, load_vocab(out / SEMANTIC_VOCAB))
    sem = token_cache["sem"]
    needs_acoustic = name in ("s2s", "s2s_no_chain", "single_lm")
    if needs_acoustic and "ac" not in token_cache:
        codec, _ = load_codec(out / CODEC_STAGE2)
        token_cache["ac"] = acoustic_token_pairs(pairs, codec)
    ac = token_cache.get("ac")

    layout = VocabLayout(plan.kmeans_k, plan.codec.merged_codebook_size)
    if name == "n2s":
        samples = [build_n2s_sequence(sb, sc, layout) for sb, sc in sem]
        n_layers = None
    elif name == "s2s":
        samples = [build_s2s_sequence(sb, sc, ab, ac_, layout)
                   for (sb, sc), (ab, ac_) in zip(sem, ac)]
        n_layers = None
    elif name == "s2s_no_chain":
        samples = [build_s2s_sequence(sb, sc, ab, ac_, layout, chain_prompt=False)
                   for (sb, sc), (ab, ac_) in zip(sem, ac)]
        n_layers = None
    else:  # single_lm: noisy semantic straight to clean acoustic
        samples = [build_single_lm_sequence(sb, ac_, layout)
                   for (sb, _), (_, ac_) in zip(sem, ac)]
        n_layers = plan.single_lm_layers
    steps = plan.n2s_steps if name == "n2s" else plan.s2s_steps

    model = TokenLm.init(plan.lm_config(layout.vocab_size, n_layers),
                         derive_seed(plan.seed, name, "init"))
    res = train_lm(model, samples, layout, steps=steps, batch_size=plan.lm_batch,
                   seed=derive_seed(plan.seed, name, "train"), lr=plan.lm_lr,
                   log_path=out / f"{name}_log.csv", verbose=verbose)
    save_lm(out / f"{name}.ckpt", model, layout,
            {"role": name, "steps": steps, "final_loss": res["final_loss"],
             "final_accuracy": res["final_accuracy"]})
    return {"steps": steps, "final_loss": res["final_loss"],
            "final_accuracy": res["final_accuracy"]}


def plan_bundle(plan: PlanConfig):
    """Load the finished plan directory as a runtime bundle."""
    return load_bundle(plan.out_dir)
