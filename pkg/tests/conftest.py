"""Shared micro-scale training run: one tiny corpus and one full plan,
trained once per session, for every test that needs real artifacts."""

import pytest

from tokse.audio import make_corpus
from tokse.codec import CodecConfig
from tokse.pipeline import PlanConfig, run_training_plan

MICRO_CODEC = CodecConfig(strides=(2, 4, 5, 8), channels=(4, 8, 12, 16),
                          base_channels=4, latent_dim=8, group_codebook_size=8,
                          reorg_n=8, reorg_k=8)


def micro_plan(corpus_dir, out_dir, **overrides):
    kw = dict(seed=5, codec=MICRO_CODEC, stage1_steps=12, stage1_batch=2,
              stage2_steps=6, stage2_batch=2, kmeans_k=8, kmeans_iters=5,
              lm_layers=2, lm_heads=2, lm_dim=32, lm_context=256,
              single_lm_layers=4, n2s_steps=8, s2s_steps=8, lm_batch=4)
    kw.update(overrides)
    return PlanConfig(str(corpus_dir), str(out_dir), **kw)


@pytest.fixture(scope="session")
def micro_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("micro_run")
    corpus = root / "corpus"
    make_corpus(corpus, n_utterances=10, seed=11)
    plan = micro_plan(corpus, root / "run")
    results = run_training_plan(plan)
    return plan, results


def force_constant(model, token: int):
    """Turn an LM into a constant emitter: every step's argmax is `token`."""
    for _, t in model.named_params():
        t.data[...] = 0.0
    model.ln_f.shift.data[0] = 1.0
    model.head.w.data[0, token] = 10.0


def force_constant_checkpoint(path, token: int):
    """Rewrite a saved LM so it always emits `token` (metadata preserved)."""
    from tokse.lm import load_lm, save_lm

    model, layout, meta = load_lm(path)
    force_constant(model, token)
    extra = {k: v for k, v in meta.items() if k not in ("kind", "config", "layout")}
    save_lm(path, model, layout, extra)
