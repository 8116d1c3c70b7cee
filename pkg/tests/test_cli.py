"""Command-line interface: subcommand behavior, exit codes, idempotency."""

import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import force_constant_checkpoint
from tokse import cli
from tokse.audio.waveform import read_wav
from tokse.codec import load_codec
from tokse.evals import MetricReport
from tokse.grad import load_checkpoint
from tokse.pipeline import (CODEC_STAGE1, N2S_CHECKPOINT, S2S_CHECKPOINT,
                            load_bundle)
from tokse.semantic import read_token_file

MICRO_YAML = """\
codec:
  strides: [2, 4, 5, 8]
  channels: [4, 8, 12, 16]
  base_channels: 4
  latent_dim: 8
  group_codebook_size: 8
  reorg_n: 8
  reorg_k: 8
lm:
  layers: 2
  heads: 2
  dim: 32
  context: 256
  single_lm_layers: 2
training:
  seed: 5
  kmeans_k: 8
  kmeans_iters: 3
"""


def run_cli(*argv):
    """In-process invocation; returns the exit code."""
    return cli.main([str(a) for a in argv])


@pytest.fixture()
def no_tokse_env(monkeypatch):
    monkeypatch.delenv(cli.ENV_SEED, raising=False)
    monkeypatch.delenv(cli.ENV_THREADS, raising=False)


@pytest.fixture(scope="session")
def cli_bundle(micro_run, tmp_path_factory):
    """A disposable copy of the trained micro bundle whose LMs are rewritten
    as constant emitters, so enhancement succeeds deterministically."""
    plan, _ = micro_run
    root = tmp_path_factory.mktemp("cli_bundle")
    bundle_dir = root / "bundle"
    shutil.copytree(plan.out_dir, bundle_dir)
    probe = load_bundle(bundle_dir)
    acoustic = int(probe.layout.shift_acoustic(np.array([5]))[0])
    force_constant_checkpoint(bundle_dir / "n2s.ckpt", 3)
    for name in ("s2s.ckpt", "s2s_no_chain.ckpt", "single_lm.ckpt"):
        force_constant_checkpoint(bundle_dir / name, acoustic)
    return plan, bundle_dir


def _degraded_wav(plan) -> Path:
    return Path(plan.corpus_dir) / "wavs" / "utt_00002_degraded.wav"


# ------------------------------------------------------------ training flow ---

def test_training_recipe_end_to_end(tmp_path, no_tokse_env, capsys):
    corpus, out = tmp_path / "corpus", tmp_path / "run"
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(MICRO_YAML)

    assert run_cli("gen-data", "--out", corpus, "--count", 4, "--seed", 11) == 0
    for argv in (("train-codec", "--stage", 1, "--steps", 3, "--batch", 2),
                 ("train-codec", "--stage", 2, "--steps", 2, "--batch", 2),
                 ("fit-kmeans", "--k", 8, "--iters", 2),
                 ("train-n2s", "--steps", 2, "--batch", 2),
                 ("train-s2s", "--steps", 2, "--batch", 2),
                 ("train-s2s", "--steps", 2, "--batch", 2, "--no-chain-prompt"),
                 ("train-s2s", "--steps", 2, "--batch", 2, "--single-lm")):
        code = run_cli(*argv, "--corpus", corpus, "--out", out, "--config", cfg)
        assert code == 0, f"{argv} failed"
    capsys.readouterr()

    # the directory is now a loadable bundle with consistent shapes
    bundle = load_bundle(out)
    assert bundle.codec.quantizer.codebook_size == 64
    assert bundle.layout.n_semantic == 8

    # retraining an existing stage refuses without --force, runs with it
    assert run_cli("train-codec", "--stage", 1, "--corpus", corpus, "--out", out,
                   "--config", cfg, "--steps", 3, "--batch", 2) == cli.EXIT_UNWRITABLE
    assert run_cli("train-codec", "--stage", 1, "--corpus", corpus, "--out", out,
                   "--config", cfg, "--steps", 3, "--batch", 2, "--force") == 0


def test_gen_data_is_idempotent_under_force(tmp_path, no_tokse_env, capsys):
    out = tmp_path / "corpus"
    assert run_cli("gen-data", "--out", out, "--count", 2, "--seed", 3) == 0
    first = (out / "manifest.tsv").read_bytes()
    assert run_cli("gen-data", "--out", out, "--count", 2, "--seed", 3) == cli.EXIT_UNWRITABLE
    assert run_cli("gen-data", "--out", out, "--count", 2, "--seed", 3, "--force") == 0
    assert (out / "manifest.tsv").read_bytes() == first
    capsys.readouterr()


def test_seed_precedence_flag_over_env(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv(cli.ENV_THREADS, raising=False)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    monkeypatch.delenv(cli.ENV_SEED, raising=False)
    assert run_cli("gen-data", "--out", a, "--count", 2, "--seed", 7) == 0
    monkeypatch.setenv(cli.ENV_SEED, "7")
    assert run_cli("gen-data", "--out", b, "--count", 2) == 0
    monkeypatch.setenv(cli.ENV_SEED, "9999")
    assert run_cli("gen-data", "--out", c, "--count", 2, "--seed", 7) == 0
    capsys.readouterr()

    ref = (a / "manifest.tsv").read_bytes()
    assert (b / "manifest.tsv").read_bytes() == ref  # env supplies the seed
    assert (c / "manifest.tsv").read_bytes() == ref  # flag beats the env


def test_threads_flag_caps_numeric_pools(tmp_path, no_tokse_env, capsys):
    saved = {v: os.environ.get(v) for v in cli._THREAD_ENV_VARS}
    try:
        assert run_cli("gen-data", "--out", tmp_path / "t", "--count", 2,
                       "--threads", 2) == 0
        assert all(os.environ[v] == "2" for v in cli._THREAD_ENV_VARS)
    finally:
        for var, value in saved.items():
            if value is None:
                os.environ.pop(var, None)
            else:
                os.environ[var] = value
    capsys.readouterr()


# ------------------------------------------------------------------ reorg ---

def test_reorg_writes_merged_checkpoint_of_requested_size(micro_run, tmp_path,
                                                          no_tokse_env, capsys):
    plan, _ = micro_run
    stage1 = Path(plan.out_dir) / CODEC_STAGE1
    out = tmp_path / "merged.ckpt"
    assert run_cli("reorg", "--ckpt", stage1, "--out", out, "--n", 8, "--k", 8) == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["codebook_size"] == 64

    codec, meta = load_codec(out)
    assert codec.quantizer.codebook_size == 64
    assert meta["steps"] == 0

    # everything except the quantizer is carried over byte for byte
    src, _ = load_checkpoint(stage1)
    dst, _ = load_checkpoint(out)
    for key, value in src.items():
        if not key.startswith("quant/"):
            assert np.array_equal(dst[key], value), key

    smaller = tmp_path / "smaller.ckpt"
    assert run_cli("reorg", "--ckpt", stage1, "--out", smaller, "--n", 4, "--k", 8) == 0
    assert load_codec(smaller)[0].quantizer.codebook_size == 32
    capsys.readouterr()


# ----------------------------------------------------------------- enhance ---

def test_enhance_writes_wav_and_intermediates(cli_bundle, tmp_path,
                                              no_tokse_env, capsys):
    plan, bundle_dir = cli_bundle
    out = tmp_path / "enhanced.wav"
    assert run_cli("enhance", "--bundle", bundle_dir, "--in", _degraded_wav(plan),
                   "--out", out, "--dump-intermediates") == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])

    wave = read_wav(out)
    assert wave.samples.size == payload["samples"] > 0
    names = ("noisy_semantic", "clean_semantic", "noisy_acoustic", "clean_acoustic")
    token_files = [tmp_path / f"enhanced.{n}.tokens" for n in names]
    assert all(f.exists() for f in token_files)
    assert len(payload["files"]) == 5
    # the dumped streams are readable and the generated ones are constant
    (clean_sem,) = read_token_file(token_files[1])
    assert set(clean_sem) == {3}

    assert run_cli("enhance", "--bundle", bundle_dir, "--in", _degraded_wav(plan),
                   "--out", out) == cli.EXIT_UNWRITABLE
    assert run_cli("enhance", "--bundle", bundle_dir, "--in", _degraded_wav(plan),
                   "--out", out, "--force") == 0
    capsys.readouterr()


def test_enhance_ablation_modes_dump_fewer_streams(cli_bundle, tmp_path,
                                                   no_tokse_env, capsys):
    plan, bundle_dir = cli_bundle
    out = tmp_path / "single.wav"
    assert run_cli("enhance", "--bundle", bundle_dir, "--in", _degraded_wav(plan),
                   "--out", out, "--mode", "single_lm", "--dump-intermediates") == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    # the one-model variant has no clean-semantic or noisy-acoustic stage
    assert (tmp_path / "single.noisy_semantic.tokens").exists()
    assert (tmp_path / "single.clean_acoustic.tokens").exists()
    assert not (tmp_path / "single.clean_semantic.tokens").exists()
    assert not (tmp_path / "single.noisy_acoustic.tokens").exists()
    assert len(payload["files"]) == 3


def test_enhance_topk_sampling_is_seeded(cli_bundle, tmp_path, no_tokse_env, capsys):
    plan, bundle_dir = cli_bundle
    a, b = tmp_path / "a.wav", tmp_path / "b.wav"
    for out in (a, b):
        assert run_cli("enhance", "--bundle", bundle_dir, "--in", _degraded_wav(plan),
                       "--out", out, "--sampling", "topk", "--top-k", 4,
                       "--seed", 123) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


# -------------------------------------------------------------------- eval ---

def test_eval_codec_writes_csv_report(cli_bundle, tmp_path, no_tokse_env, capsys):
    plan, bundle_dir = cli_bundle
    out = tmp_path / "codec.csv"
    assert run_cli("eval", "--bundle", bundle_dir, "--corpus", plan.corpus_dir,
                   "--out", out, "--mode", "codec", "--limit", 3) == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["records"] == 3
    report = MetricReport.from_csv(out)
    assert len(report) == 3
    assert {"utterance", "lsd_db", "mcd_db", "si_snr_db"} <= set(report.columns())


def test_eval_ablation_scores_every_mode(cli_bundle, tmp_path, no_tokse_env, capsys):
    plan, bundle_dir = cli_bundle
    out = tmp_path / "ablation.csv"
    assert run_cli("eval", "--bundle", bundle_dir, "--corpus", plan.corpus_dir,
                   "--out", out, "--mode", "ablation", "--limit", 2) == 0
    capsys.readouterr()
    report = MetricReport.from_csv(out)
    assert len(report) == 6
    assert {r["mode"] for r in report.records} == {"full", "no_chain_prompt",
                                                   "single_lm"}


# ------------------------------------------------------------- usage sweep ---

def test_usage_sweep_writes_csv_and_svg(micro_run, tmp_path, no_tokse_env, capsys):
    plan, _ = micro_run
    csv_out, svg_out = tmp_path / "sweep.csv", tmp_path / "sweep.svg"
    assert run_cli("usage-sweep", "--ckpt", Path(plan.out_dir) / CODEC_STAGE1,
                   "--corpus", plan.corpus_dir, "--sizes", "8,16",
                   "--steps", 3, "--batch", 64, "--limit", 4,
                   "--out", csv_out, "--svg", svg_out) == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert [r["codebook_size"] for r in payload["rows"]] == [8, 16]
    assert csv_out.read_text().startswith("codebook_size,")
    assert svg_out.read_text().startswith("<svg")


# -------------------------------------------------------------- exit codes ---

def test_missing_inputs_exit_3(cli_bundle, tmp_path, no_tokse_env, capsys):
    plan, bundle_dir = cli_bundle
    empty = tmp_path / "empty"
    empty.mkdir()
    wav = _degraded_wav(plan)
    assert run_cli("enhance", "--bundle", bundle_dir, "--in", tmp_path / "no.wav",
                   "--out", tmp_path / "o.wav") == cli.EXIT_MISSING_ARTIFACT
    assert run_cli("enhance", "--bundle", empty, "--in", wav,
                   "--out", tmp_path / "o.wav") == cli.EXIT_MISSING_ARTIFACT
    assert run_cli("train-s2s", "--corpus", plan.corpus_dir, "--out", empty
                   ) == cli.EXIT_MISSING_ARTIFACT
    assert run_cli("eval", "--bundle", bundle_dir, "--corpus", tmp_path / "nodir",
                   "--out", tmp_path / "r.csv", "--mode", "codec"
                   ) == cli.EXIT_MISSING_ARTIFACT
    assert run_cli("reorg", "--ckpt", tmp_path / "no.ckpt",
                   "--out", tmp_path / "m.ckpt") == cli.EXIT_MISSING_ARTIFACT
    assert run_cli("train-n2s", "--corpus", tmp_path / "nodir", "--out", empty
                   ) == cli.EXIT_MISSING_ARTIFACT
    err = capsys.readouterr().err
    assert "does not exist" in err or "missing" in err


def test_bad_configuration_exits_4(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv(cli.ENV_SEED, raising=False)
    corpus, out = tmp_path / "c", tmp_path / "o"
    assert run_cli("gen-data", "--out", corpus, "--count", 2) == 0

    unknown_key = tmp_path / "k.yaml"
    unknown_key.write_text("training:\n  bogus: 3\n")
    assert run_cli("train-n2s", "--corpus", corpus, "--out", out,
                   "--config", unknown_key) == cli.EXIT_BAD_CONFIG

    unknown_section = tmp_path / "s.yaml"
    unknown_section.write_text("mystery:\n  a: 1\n")
    assert run_cli("train-n2s", "--corpus", corpus, "--out", out,
                   "--config", unknown_section) == cli.EXIT_BAD_CONFIG

    broken = tmp_path / "b.yaml"
    broken.write_text("not: [valid\n")
    assert run_cli("train-n2s", "--corpus", corpus, "--out", out,
                   "--config", broken) == cli.EXIT_BAD_CONFIG

    scalar = tmp_path / "l.yaml"
    scalar.write_text("just a string\n")
    assert run_cli("train-n2s", "--corpus", corpus, "--out", out,
                   "--config", scalar) == cli.EXIT_BAD_CONFIG

    bad_value = tmp_path / "v.yaml"
    bad_value.write_text("sampling:\n  mode: banana\n")
    assert run_cli("enhance", "--bundle", out, "--in", tmp_path / "x.wav",
                   "--out", tmp_path / "y.wav",
                   "--config", bad_value) == cli.EXIT_BAD_CONFIG

    monkeypatch.setenv(cli.ENV_THREADS, "not-a-number")
    assert run_cli("gen-data", "--out", tmp_path / "c2", "--count", 2
                   ) == cli.EXIT_BAD_CONFIG
    capsys.readouterr()


def test_missing_config_file_exits_3(tmp_path, no_tokse_env, capsys):
    assert run_cli("train-n2s", "--corpus", tmp_path, "--out", tmp_path / "o",
                   "--config", tmp_path / "none.yaml") == cli.EXIT_MISSING_ARTIFACT
    capsys.readouterr()


def test_usage_errors_exit_2_and_help_exits_0(capsys):
    assert run_cli("no-such-subcommand") == 2
    assert run_cli() == 2
    assert run_cli("--help") == 0
    assert run_cli("enhance", "--help") == 0
    out = capsys.readouterr().out
    assert "--dump-intermediates" in out


def test_installed_entry_point(tmp_path):
    exe = shutil.which("tokse")
    if exe is None:
        pytest.skip("console script not on PATH")
    done = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert done.returncode == 0
    for name in ("gen-data", "train-codec", "reorg", "fit-kmeans", "train-n2s",
                 "train-s2s", "enhance", "eval", "usage-sweep"):
        assert name in done.stdout
    done = subprocess.run([exe, "gen-data", "--out", str(tmp_path / "c"),
                           "--count", "1"], capture_output=True, text=True)
    assert done.returncode == 0
    resolved = json.loads(done.stderr.strip().splitlines()[0])
    assert resolved["command"] == "gen-data"
