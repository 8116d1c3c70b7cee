"""Metric correctness against independent loop oracles, report plumbing,
and the experiment helpers (usage sweep, curve attainment, denoising probe,
corpus evaluation)."""

import csv
import math

import numpy as np
import pytest

from tokse.audio import (SpectralConfig, Waveform, default_templates,
                         mel_filterbank, read_manifest, read_wav, stft,
                         synth_utterance)
from tokse.evals import (MetricReport, cepstra, encoder_latents,
                         evaluate_codec, evaluate_enhancement,
                         long_term_average_spectrum, lsd, lsd_trimmed, mcd,
                         mcd_from_cepstra, read_sweep_csv, si_snr,
                         steps_to_reach, substitution_experiment,
                         timbre_correlation, token_accuracy, usage_sweep)
from tokse.pipeline import load_bundle

RATE = 16000


def _pair(seed=314, n=4000, noise=0.05):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 0.2, n).astype(np.float32)
    y = (x + rng.normal(0, noise, n)).astype(np.float32)
    return Waveform(x, RATE), Waveform(y, RATE)


def test_lsd_identical_is_zero():
    wx, _ = _pair()
    assert lsd(wx, wx) == 0.0


def test_lsd_of_doubled_signal_is_constant_db_offset():
    wx, _ = _pair()
    doubled = Waveform(2.0 * wx.samples, RATE)
    assert abs(lsd(wx, doubled) - 20.0 * math.log10(2.0)) < 1e-9


def test_lsd_matches_explicit_loop():
    wx, wy = _pair()
    cfg = SpectralConfig()
    fb = mel_filterbank(cfg, RATE)

    def slow_logmel(w):
        spec = stft(w, cfg)
        out = np.zeros((spec.shape[0], fb.shape[0]))
        for t in range(spec.shape[0]):
            for b in range(fb.shape[0]):
                acc = 0.0
                for k in range(fb.shape[1]):
                    acc += fb[b, k] * abs(spec[t, k])
                out[t, b] = math.log(max(acc, 1e-10))
        return out

    la, lb = slow_logmel(wx), slow_logmel(wy)
    diffs = [(lb[t, b] - la[t, b]) * 20.0 / math.log(10.0)
             for t in range(la.shape[0]) for b in range(la.shape[1])]
    oracle = math.sqrt(sum(d * d for d in diffs) / len(diffs))
    assert abs(lsd(wx, wy) - oracle) < 1e-9


def test_lsd_is_symmetric():
    wx, wy = _pair(seed=5)
    assert lsd(wx, wy) == lsd(wy, wx)


def test_lsd_rejects_mismatched_inputs():
    wx, _ = _pair()
    with pytest.raises(ValueError, match="lengths differ"):
        lsd(wx, Waveform(wx.samples[:-1], RATE))
    with pytest.raises(ValueError, match="sample rates differ"):
        lsd(wx, Waveform(wx.samples, 8000))


def test_lsd_trimmed_scores_common_prefix():
    wx, wy = _pair()
    longer = Waveform(np.concatenate([wy.samples, np.zeros(700, np.float32)]), RATE)
    assert lsd_trimmed(wx, longer) == lsd(wx, wy)
    assert lsd_trimmed(longer, wx) == lsd(wy, wx)
    with pytest.raises(ValueError, match="shorter than one analysis frame"):
        lsd_trimmed(wx, Waveform(wy.samples[:100], RATE))


def test_mcd_identical_is_zero():
    wx, _ = _pair()
    assert mcd(wx, wx) == 0.0


def test_mcd_single_cepstral_delta_formula():
    rng = np.random.default_rng(0)
    c_ref = rng.normal(size=(1, 14))
    c_est = c_ref.copy()
    c_est[0, 3] += 0.37
    expected = 10.0 / math.log(10.0) * math.sqrt(2.0) * 0.37
    assert abs(mcd_from_cepstra(c_ref, c_est) - expected) < 1e-12

    only_c0 = c_ref.copy()
    only_c0[0, 0] += 5.0  # the 0th coefficient is excluded by definition
    assert mcd_from_cepstra(c_ref, only_c0) == 0.0


def test_mcd_matches_explicit_loop():
    wx, wy = _pair()
    ca, cb = cepstra(wx), cepstra(wy)
    acc = 0.0
    for t in range(ca.shape[0]):
        for i in range(1, ca.shape[1]):
            acc += (cb[t, i] - ca[t, i]) ** 2
    oracle = 10.0 / math.log(10.0) * math.sqrt(2.0 * acc / ca.shape[0])
    assert abs(mcd(wx, wy) - oracle) < 1e-9
    assert mcd(wx, wy) == mcd(wy, wx)


def test_mcd_rejects_shape_mismatch():
    with pytest.raises(ValueError, match="shapes differ"):
        mcd_from_cepstra(np.zeros((2, 14)), np.zeros((3, 14)))


def test_si_snr_perfect_and_negated_hit_the_cap():
    rng = np.random.default_rng(1)
    r = Waveform(rng.normal(size=2048), RATE)
    flipped = Waveform(-r.samples, RATE)
    assert si_snr(r, r) == 60.0
    assert si_snr(r, flipped) == 60.0  # scale invariance includes negative scale


def test_si_snr_orthogonal_equal_power_noise_is_zero_db():
    rng = np.random.default_rng(2)
    r = rng.normal(size=2048)
    r -= r.mean()
    q = rng.normal(size=2048)
    q -= q.mean()
    q -= (q @ r) / (r @ r) * r
    q *= np.linalg.norm(r) / np.linalg.norm(q)
    assert abs(si_snr(Waveform(r, RATE), Waveform(r + q, RATE))) < 1e-9
    # scaling the orthogonal part by 0.1 leaves a 20 dB ratio
    assert abs(si_snr(Waveform(r, RATE), Waveform(r + 0.1 * q, RATE)) - 20.0) < 1e-9


def test_si_snr_rejects_silent_reference():
    silent = Waveform(np.zeros(512, np.float32), RATE)
    live = Waveform(np.ones(512, np.float32), RATE)
    with pytest.raises(ValueError, match="silent"):
        si_snr(silent, live)


def test_timbre_correlation_self_and_cross_template():
    a = synth_utterance(0, 1.0, default_templates()[0])
    b = synth_utterance(1, 1.0, default_templates()[5])
    assert abs(timbre_correlation(a, a) - 1.0) < 1e-12
    assert timbre_correlation(a, b) < 0.99
    assert long_term_average_spectrum(a).shape == (257,)


def test_timbre_correlation_rejects_flat_spectrum():
    silent = Waveform(np.zeros(1024, np.float32), RATE)
    live, _ = _pair()
    with pytest.raises(ValueError, match="flat spectrum"):
        timbre_correlation(silent, live)


def test_token_accuracy_counts_matches():
    assert token_accuracy([1, 2, 3, 4], [1, 2, 0, 4]) == 0.75
    with pytest.raises(ValueError, match="shape"):
        token_accuracy([1, 2], [1, 2, 3])
    with pytest.raises(ValueError, match="empty"):
        token_accuracy([], [])


def test_metric_report_aggregates_recompute_from_records():
    rep = MetricReport()
    rep.add(utterance="a", lsd_db=2.0, improved=True)
    rep.add(utterance="b", lsd_db=4.0, improved=False, note="capped")
    rep.add(utterance="c", lsd_db=None, improved=False)
    assert len(rep) == 3
    assert rep.columns() == ["utterance", "lsd_db", "improved", "note"]
    assert rep.mean("lsd_db") == 3.0          # None rows drop out
    assert rep.median("lsd_db") == 3.0
    assert abs(rep.mean("improved") - 1 / 3) < 1e-15
    agg = rep.aggregates()
    assert agg["mean"]["lsd_db"] == rep.mean("lsd_db")
    assert agg["median"]["improved"] == rep.median("improved")
    assert "utterance" not in agg["mean"]     # no numeric content
    with pytest.raises(ValueError, match="no numeric values"):
        rep.mean("utterance")


def test_metric_report_csv_round_trip(tmp_path):
    rep = MetricReport()
    rep.add(utterance="a", lsd_db=2.5, improved=True, failed=False)
    rep.add(utterance="b", lsd_db=None, improved=False, failed=True)
    path = tmp_path / "report.csv"
    rep.to_csv(path)
    back = MetricReport.from_csv(path)
    assert back.records[0]["utterance"] == "a"
    assert back.records[0]["lsd_db"] == 2.5
    assert back.records[0]["improved"] is True
    assert back.records[1]["lsd_db"] is None
    assert back.records[1]["failed"] is True
    assert back.aggregates() == rep.aggregates()


def test_usage_sweep_collapses_on_bounded_support():
    """With only 100 distinct vectors, a 512-entry codebook can keep at
    most 100 active entries, while 16 entries stay fully used."""
    rng = np.random.default_rng(9)
    uniq = rng.normal(0, 1.0, (100, 8)).astype(np.float32)
    latents = uniq[rng.integers(0, 100, 2000)]
    rows = usage_sweep(latents, (16, 512), steps=60, batch=256, seed=9)
    assert [r["codebook_size"] for r in rows] == [16, 512]
    assert rows[0]["active_fraction"] == 1.0
    assert rows[1]["active_fraction"] <= 100 / 512
    assert rows[1]["recon_proxy"] <= rows[0]["recon_proxy"]


def test_usage_sweep_writes_csv_and_svg(tmp_path):
    rng = np.random.default_rng(3)
    latents = rng.normal(0, 1, (400, 4)).astype(np.float32)
    csv_path = tmp_path / "sweep.csv"
    svg_path = tmp_path / "sweep.svg"
    rows = usage_sweep(latents, (4, 16), steps=20, batch=64, seed=1,
                       csv_path=csv_path, svg_path=svg_path)
    assert read_sweep_csv(csv_path) == rows
    svg = svg_path.read_text(encoding="utf-8")
    assert svg.startswith("<svg") and "polyline" in svg
    with pytest.raises(ValueError, match="at least one codebook size"):
        usage_sweep(latents, ())


def test_steps_to_reach_uses_trailing_window(tmp_path):
    path = tmp_path / "curve.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "l_rec"])
        writer.writerows([(1, 5.0), (2, 1.0), (3, 1.0)])
    assert steps_to_reach(path, 10.0, window=2) == 1
    assert steps_to_reach(path, 2.0, window=2) == 3   # trailing means 5, 3, 1
    assert steps_to_reach(path, 2.0, window=1) == 2
    assert steps_to_reach(path, 0.5, window=2) is None


def test_substitution_probe_beats_identity_on_learnable_streams():
    """Constant-token streams corrupted at 30%: restoring the majority
    token is learnable, so the probe must clear the identity baseline."""
    k = 8
    rng = np.random.default_rng(42)
    streams = [np.full(30, rng.integers(0, k), dtype=np.int64) for _ in range(40)]
    out = substitution_experiment(streams, k, steps=200, n_layers=2,
                                  n_heads=2, dim=32, seed=1)
    assert out["n_train"] == 32 and out["n_holdout"] == 8
    assert 0.6 < out["identity_accuracy"] < 0.85
    assert out["model_accuracy"] >= out["identity_accuracy"] + 0.05


def test_substitution_probe_needs_enough_streams():
    with pytest.raises(ValueError, match="at least five"):
        substitution_experiment([np.zeros(4, np.int64)] * 3, 4)


def test_evaluate_codec_scores_every_utterance(micro_run):
    plan, _ = micro_run
    bundle = load_bundle(plan.out_dir)
    report = evaluate_codec(bundle.codec, plan.corpus_dir)
    assert len(report) == 10
    first = report.records[0]
    assert first["utterance"] == "utt_00000"
    assert set(first) == {"utterance", "lsd_db", "mcd_db", "si_snr_db",
                          "token_accuracy"}
    assert 0.0 <= first["token_accuracy"] <= 1.0
    assert np.isfinite(report.mean("si_snr_db"))
    assert report.mean("lsd_db") > 0.0


def _force_constant(model, token: int):
    for _, t in model.named_params():
        t.data[...] = 0.0
    model.ln_f.shift.data[0] = 1.0
    model.head.w.data[0, token] = 10.0


def test_evaluate_enhancement_records_and_failures(micro_run):
    plan, _ = micro_run
    bundle = load_bundle(plan.out_dir)
    _force_constant(bundle.n2s, 3)
    _force_constant(bundle.s2s, bundle.layout.shift_acoustic(np.array([5]))[0])
    report = evaluate_enhancement(bundle, plan.corpus_dir, limit=4)
    assert len(report) == 4
    for rec in report.records:
        assert rec["failed"] is False
        assert rec["lsd_enhanced_db"] > 0.0
        assert isinstance(rec["improved"], (bool, np.bool_))
        assert -1.0 <= rec["timbre_corr"] <= 1.0

    # an LM that immediately stops produces a tagged failure, not a crash
    _force_constant(bundle.s2s, bundle.layout.eos)
    failed = evaluate_enhancement(bundle, plan.corpus_dir, limit=2)
    assert all(r["failed"] for r in failed.records)
    assert all(not r["improved"] for r in failed.records)
    assert "[s2s]" in failed.records[0]["error"]


def test_encoder_latents_stacks_frames(micro_run):
    plan, _ = micro_run
    bundle = load_bundle(plan.out_dir)
    records = read_manifest(f"{plan.corpus_dir}/manifest.tsv")
    waves = [read_wav(f"{plan.corpus_dir}/{r.clean_path}") for r in records[:3]]
    latents = encoder_latents(bundle.codec, waves)
    assert latents.shape == (150, 8)  # three 1 s clips at 50 frames each
