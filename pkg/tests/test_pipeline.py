"""End-to-end plan orchestration and the enhancement chain, at micro scale.

One tiny plan (10 utterances, thumb-sized codec and LMs) is trained once per
module; the tests poke at its artifacts, resume behavior, determinism, and
the bundle/enhance contracts. LM weights get overwritten with hand-forced
constant emitters where the chain's shape, not its quality, is under test.
"""

import hashlib
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from conftest import force_constant as _force_constant, micro_plan
from tokse.audio import Waveform, read_wav
from tokse.lm import VocabLayout, save_lm
from tokse.pipeline import (CODEC_STAGE1, CODEC_STAGE2, CONFIG_SNAPSHOT,
                            N2S_CHECKPOINT, PLAN_LOG, PROVENANCE,
                            S2S_CHECKPOINT, SEMANTIC_VOCAB,
                            SINGLE_LM_CHECKPOINT, BundleError, PlanError,
                            StageError, enhance, enhance_detailed,
                            load_bundle, plan_from_dict, plan_to_dict,
                            run_stage, run_training_plan, stage_names)

def _artifact_digests(out_dir):
    return {p.name: hashlib.blake2b(p.read_bytes()).hexdigest()
            for p in out_dir.iterdir() if p.name != PLAN_LOG}


def test_plan_writes_every_artifact(micro_run):
    plan, results = micro_run
    out = Path(plan.out_dir)
    for name in (CODEC_STAGE1, CODEC_STAGE2, SEMANTIC_VOCAB, N2S_CHECKPOINT,
                 S2S_CHECKPOINT, "s2s_no_chain.ckpt", SINGLE_LM_CHECKPOINT,
                 CONFIG_SNAPSHOT, PROVENANCE, PLAN_LOG):
        assert (out / name).exists(), name
    assert set(results) == set(stage_names(plan))
    assert not any(v.get("skipped") for v in results.values())


def test_config_snapshot_has_no_paths_and_round_trips(micro_run):
    plan, _ = micro_run
    snap = json.loads((Path(plan.out_dir) / CONFIG_SNAPSHOT).read_text())
    assert "corpus_dir" not in snap and "out_dir" not in snap
    rebuilt = plan_from_dict(snap, plan.corpus_dir, plan.out_dir)
    assert rebuilt == plan
    assert plan_to_dict(rebuilt) == snap


def test_provenance_is_path_free_and_complete(micro_run):
    plan, _ = micro_run
    text = (Path(plan.out_dir) / PROVENANCE).read_text()
    assert plan.out_dir not in text and plan.corpus_dir not in text
    prov = json.loads(text)
    assert prov["plan_seed"] == plan.seed
    assert len(prov["corpus_fingerprint"]) == 32
    assert set(prov["stages"]) == set(stage_names(plan))
    assert prov["stages"]["s2s"]["steps"] == plan.s2s_steps


def test_rerun_skips_every_stage_and_preserves_provenance(micro_run):
    plan, _ = micro_run
    out = Path(plan.out_dir)
    before = (out / PROVENANCE).read_bytes()
    results = run_training_plan(plan)
    assert all(v.get("skipped") for v in results.values())
    assert (out / PROVENANCE).read_bytes() == before


def test_deleted_checkpoint_retrains_only_that_stage_identically(micro_run):
    plan, _ = micro_run
    out = Path(plan.out_dir)
    original = (out / N2S_CHECKPOINT).read_bytes()
    (out / N2S_CHECKPOINT).unlink()
    results = run_training_plan(plan)
    reran = [k for k, v in results.items() if not v.get("skipped")]
    assert reran == ["n2s"]
    assert (out / N2S_CHECKPOINT).read_bytes() == original


def test_fresh_rerun_is_byte_identical(micro_run, tmp_path):
    plan, _ = micro_run
    replay = micro_plan(plan.corpus_dir, tmp_path / "replay")
    run_training_plan(replay)
    assert _artifact_digests(tmp_path / "replay") == _artifact_digests(Path(plan.out_dir))


def test_changed_config_in_same_out_dir_refuses(micro_run):
    plan, _ = micro_run
    tweaked = micro_plan(plan.corpus_dir, plan.out_dir, kmeans_iters=6)
    with pytest.raises(PlanError, match="different plan config"):
        run_training_plan(tweaked)


def test_lm_stage_refuses_before_its_inputs_exist(tmp_path):
    plan = micro_plan(tmp_path / "nocorpus", tmp_path / "empty")
    (tmp_path / "empty").mkdir()
    with pytest.raises(PlanError, match="semantic vocabulary"):
        run_stage(plan, "n2s")
    with pytest.raises(PlanError, match="stage-1 codec"):
        run_stage(plan, "stage2")
    with pytest.raises(PlanError, match="unknown stage"):
        run_stage(plan, "warp_drive")


def test_bundle_exposes_consistent_layout(micro_run):
    plan, _ = micro_run
    bundle = load_bundle(plan.out_dir)
    assert bundle.layout == VocabLayout(8, 64)
    assert bundle.codec.quantizer.codebook_size == 64
    assert bundle.vocab.centroids.shape[0] == 8
    assert bundle.config["kmeans_k"] == 8


def test_bundle_missing_file_is_named(micro_run, tmp_path):
    plan, _ = micro_run
    broken = tmp_path / "broken"
    shutil.copytree(plan.out_dir, broken)
    (broken / S2S_CHECKPOINT).unlink()
    with pytest.raises(BundleError, match=S2S_CHECKPOINT):
        load_bundle(broken)


def test_bundle_rejects_group_stage_codec(micro_run, tmp_path):
    plan, _ = micro_run
    broken = tmp_path / "groupcodec"
    shutil.copytree(plan.out_dir, broken)
    shutil.copyfile(broken / CODEC_STAGE1, broken / CODEC_STAGE2)
    with pytest.raises(BundleError, match="merged-codebook"):
        load_bundle(broken)


def test_bundle_rejects_mismatched_lm_layout(micro_run, tmp_path):
    plan, _ = micro_run
    broken = tmp_path / "badlayout"
    shutil.copytree(plan.out_dir, broken)
    bundle = load_bundle(plan.out_dir)
    save_lm(broken / N2S_CHECKPOINT, bundle.n2s, VocabLayout(9, 64), {"role": "n2s"})
    with pytest.raises(BundleError, match="layout"):
        load_bundle(broken)


def test_missing_ablation_checkpoint_is_a_bundle_error(micro_run, tmp_path):
    plan, _ = micro_run
    partial = tmp_path / "partial"
    shutil.copytree(plan.out_dir, partial)
    (partial / SINGLE_LM_CHECKPOINT).unlink()
    bundle = load_bundle(partial)  # core chain still loads
    with pytest.raises(BundleError, match="single_lm"):
        bundle.ablation_lm("single_lm")
    wave = read_wav(f"{plan.corpus_dir}/wavs/utt_00003_degraded.wav")
    with pytest.raises(BundleError):
        enhance(wave, bundle, mode="single_lm")


def test_enhance_full_chain_shapes_and_determinism(micro_run):
    plan, _ = micro_run
    bundle = load_bundle(plan.out_dir)
    _force_constant(bundle.n2s, 3)
    _force_constant(bundle.s2s, bundle.layout.shift_acoustic(np.array([5]))[0])
    wave = read_wav(f"{plan.corpus_dir}/wavs/utt_00003_degraded.wav")

    r = enhance_detailed(wave, bundle)
    assert r.noisy_semantic.shape == (50,)
    assert r.noisy_acoustic.shape == (50,)
    # forced models never emit the stop token, so both generations run to
    # the length cap: ceil(1.25 * 50) = 63 tokens, 320 samples per token
    assert np.array_equal(r.clean_semantic, np.full(63, 3))
    assert np.array_equal(r.clean_acoustic, np.full(63, 5))
    assert r.wave.samples.shape == (63 * 320,)
    assert r.wave.sample_rate_hz == 16000

    again = enhance_detailed(wave, bundle)
    assert np.array_equal(r.wave.samples, again.wave.samples)
    assert np.array_equal(enhance(wave, bundle).samples, r.wave.samples)


def test_enhance_ablation_modes_skip_the_right_stages(micro_run):
    plan, _ = micro_run
    bundle = load_bundle(plan.out_dir)
    _force_constant(bundle.n2s, 3)
    _force_constant(bundle.ablation_lm("no_chain_prompt"),
                    bundle.layout.shift_acoustic(np.array([9]))[0])
    _force_constant(bundle.ablation_lm("single_lm"),
                    bundle.layout.shift_acoustic(np.array([7]))[0])
    wave = read_wav(f"{plan.corpus_dir}/wavs/utt_00004_degraded.wav")

    no_chain = enhance_detailed(wave, bundle, mode="no_chain_prompt")
    assert np.array_equal(no_chain.clean_acoustic, np.full(63, 9))
    assert no_chain.clean_semantic is not None  # still runs the denoise LM

    single = enhance_detailed(wave, bundle, mode="single_lm")
    assert np.array_equal(single.clean_acoustic, np.full(63, 7))
    assert single.clean_semantic is None and single.noisy_acoustic is None

    with pytest.raises(ValueError, match="mode"):
        enhance_detailed(wave, bundle, mode="extra_clean")


def test_enhance_tags_failures_with_their_stage(micro_run):
    plan, _ = micro_run
    bundle = load_bundle(plan.out_dir)
    tiny = Waveform(np.zeros(10, np.float32), 16000)
    with pytest.raises(StageError, match=r"\[tokenize\]") as err:
        enhance_detailed(tiny, bundle)
    assert err.value.stage == "tokenize"


def test_enhance_topk_sampling_follows_the_rng(micro_run):
    plan, _ = micro_run
    bundle = load_bundle(plan.out_dir)
    _force_constant(bundle.n2s, 2)
    _force_constant(bundle.s2s, bundle.layout.shift_acoustic(np.array([4]))[0])
    wave = read_wav(f"{plan.corpus_dir}/wavs/utt_00002_degraded.wav")
    a = enhance_detailed(wave, bundle, sampling="topk",
                         rng=np.random.default_rng(77))
    b = enhance_detailed(wave, bundle, sampling="topk",
                         rng=np.random.default_rng(77))
    assert np.array_equal(a.wave.samples, b.wave.samples)
    assert np.array_equal(a.clean_acoustic, b.clean_acoustic)
