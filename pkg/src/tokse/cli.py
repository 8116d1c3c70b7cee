"""Command-line front end: corpus generation, training stages, enhancement, evaluation.

Every subcommand maps onto one library entry point; this module only parses
arguments, resolves configuration, and translates failures into stable exit
codes:

    0  success
    1  runtime failure (training divergence, enhancement stage failure)
    2  usage errors (reported by argparse)
    3  a required input is missing (checkpoint, corpus, bundle, wav file)
    4  malformed configuration (bad syntax, unknown keys, invalid values)
    5  output already exists without --force, or the output path is unwritable

Configuration files are YAML with four optional sections -- codec, lm,
training, sampling -- whose keys mirror the library's config dataclasses.
Unknown sections or keys are rejected. Precedence: command-line flag, then
TOKSE_SEED / TOKSE_THREADS environment variables, then the config file, then
built-in defaults. The resolved settings are logged to stderr as one JSON
line before any work starts.

Heavy imports happen inside the handlers so that --threads can cap the
numeric libraries' thread pools before they are first loaded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2  # argparse's own convention; listed for completeness
EXIT_MISSING_ARTIFACT = 3
EXIT_BAD_CONFIG = 4
EXIT_UNWRITABLE = 5

ENV_SEED = "TOKSE_SEED"
ENV_THREADS = "TOKSE_THREADS"

_THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")

_CONFIG_SECTIONS = {
    "codec": {"strides", "channels", "base_channels", "latent_dim",
              "group_codebook_size", "reorg_n", "reorg_k", "sample_rate_hz",
              "ema_decay"},
    "lm": {"layers", "heads", "dim", "context", "dropout", "single_lm_layers"},
    "training": {"seed", "stage1_steps", "stage1_batch", "stage2_steps",
                 "stage2_batch", "kmeans_k", "kmeans_iters", "n2s_steps",
                 "s2s_steps", "lm_batch", "lm_lr", "train_ablations"},
    "sampling": {"mode", "top_k", "temperature"},
}

_LM_KEY_TO_PLAN = {"layers": "lm_layers", "heads": "lm_heads", "dim": "lm_dim",
                   "context": "lm_context", "dropout": "lm_dropout",
                   "single_lm_layers": "single_lm_layers"}

SAMPLING_MODES = ("greedy", "topk")


class CliError(Exception):
    """A failure with a predetermined exit code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- config ---

def load_run_config(path) -> dict:
    """Parse and validate a YAML run configuration; {} when path is None."""
    if path is None:
        return {}
    import yaml

    path = Path(path)
    if not path.exists():
        raise CliError(EXIT_MISSING_ARTIFACT, f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise CliError(EXIT_BAD_CONFIG, f"{path} is not valid YAML: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise CliError(EXIT_BAD_CONFIG, f"{path} must hold a mapping of sections")
    for section, body in raw.items():
        if section not in _CONFIG_SECTIONS:
            raise CliError(EXIT_BAD_CONFIG,
                           f"{path}: unknown section {section!r}; sections are "
                           f"{sorted(_CONFIG_SECTIONS)}")
        if body is None:
            raw[section] = {}
            continue
        if not isinstance(body, dict):
            raise CliError(EXIT_BAD_CONFIG, f"{path}: section {section!r} must be a mapping")
        unknown = set(body) - _CONFIG_SECTIONS[section]
        if unknown:
            raise CliError(EXIT_BAD_CONFIG,
                           f"{path}: unknown key(s) {sorted(unknown)} in section "
                           f"{section!r}; keys are {sorted(_CONFIG_SECTIONS[section])}")
    return raw


def _env_int(name: str):
    value = os.environ.get(name)
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        raise CliError(EXIT_BAD_CONFIG, f"{name} must be an integer, got {value!r}")


def resolve_seed(flag_seed, config: dict) -> int:
    """Flag, then TOKSE_SEED, then [training] seed, then 0."""
    if flag_seed is not None:
        return flag_seed
    env = _env_int(ENV_SEED)
    if env is not None:
        return env
    return int(config.get("training", {}).get("seed", 0))


def resolve_threads(flag_threads):
    """Flag, then TOKSE_THREADS; None means leave the pools alone."""
    n = flag_threads if flag_threads is not None else _env_int(ENV_THREADS)
    if n is None:
        return None
    if n < 1:
        raise CliError(EXIT_BAD_CONFIG, f"thread count must be >= 1, got {n}")
    return n


def _apply_threads(n: int) -> None:
    for var in _THREAD_ENV_VARS:
        os.environ[var] = str(n)


def build_plan(config: dict, corpus_dir, out_dir, seed: int, **overrides):
    """PlanConfig from a parsed run config plus per-command flag overrides."""
    from .codec import CodecConfig
    from .pipeline import PlanConfig

    codec_kwargs = dict(config.get("codec", {}))
    for key in ("strides", "channels"):
        if key in codec_kwargs:
            codec_kwargs[key] = tuple(codec_kwargs[key])
    kwargs = {"corpus_dir": Path(corpus_dir), "out_dir": Path(out_dir),
              "seed": seed, "codec": CodecConfig(**codec_kwargs)}
    for key, value in config.get("lm", {}).items():
        kwargs[_LM_KEY_TO_PLAN[key]] = value
    for key, value in config.get("training", {}).items():
        if key != "seed":  # handled by resolve_seed
            kwargs[key] = value
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return PlanConfig(**kwargs)


def resolve_sampling(args, config: dict):
    """(mode, top_k, temperature) from flags over the [sampling] section."""
    section = config.get("sampling", {})
    mode = args.sampling if args.sampling is not None else section.get("mode", "greedy")
    if mode not in SAMPLING_MODES:
        raise CliError(EXIT_BAD_CONFIG,
                       f"sampling mode must be one of {SAMPLING_MODES}, got {mode!r}")
    top_k = args.top_k if args.top_k is not None else int(section.get("top_k", 16))
    temperature = (args.temperature if args.temperature is not None
                   else float(section.get("temperature", 0.8)))
    return mode, top_k, temperature


# ---------------------------------------------------------------- helpers ---

def _log_resolved(command: str, **resolved) -> None:
    payload = {"command": command}
    payload.update(resolved)
    print(json.dumps(payload, sort_keys=True, default=str), file=sys.stderr)


def _refuse_existing(path: Path, force: bool, what: str = "output") -> None:
    if path.exists():
        if not force:
            raise CliError(EXIT_UNWRITABLE,
                           f"{what} {path} already exists; pass --force to overwrite")
        if path.is_file():
            path.unlink()


def _require_file(path: Path, what: str) -> Path:
    if not path.exists():
        raise CliError(EXIT_MISSING_ARTIFACT, f"{what} {path} does not exist")
    return path


def _require_corpus(corpus_dir) -> Path:
    corpus_dir = Path(corpus_dir)
    _require_file(corpus_dir / "manifest.tsv", "corpus manifest")
    return corpus_dir


def _plan_snapshot(plan) -> dict:
    from .pipeline import plan_to_dict

    snap = plan_to_dict(plan)
    snap["corpus_dir"] = str(plan.corpus_dir)
    snap["out_dir"] = str(plan.out_dir)
    return snap


def _run_one_stage(args, stage: str, **plan_overrides) -> int:
    """Shared body of the single-stage training subcommands."""
    from .pipeline import run_stage, stage_artifact

    config = load_run_config(args.config)
    seed = resolve_seed(args.seed, config)
    plan = build_plan(config, args.corpus, args.out, seed, **plan_overrides)
    _require_corpus(plan.corpus_dir)
    plan.out_dir.mkdir(parents=True, exist_ok=True)
    _refuse_existing(plan.out_dir / stage_artifact(stage), args.force, "checkpoint")
    _log_resolved(args.command, stage=stage, **_plan_snapshot(plan))

    info = run_stage(plan, stage, verbose=args.verbose)
    print(json.dumps({"stage": stage, **info}, sort_keys=True, default=str))
    return EXIT_OK


# ------------------------------------------------------------- subcommands ---

def cmd_gen_data(args) -> int:
    seed = resolve_seed(args.seed, {})
    out = Path(args.out)
    _refuse_existing(out / "manifest.tsv", args.force, "corpus manifest")
    _log_resolved(args.command, out=out, count=args.count, seed=seed,
                  durations_s=args.durations, sample_rate_hz=args.sample_rate,
                  noise_prob=args.noise_prob, fixed_snr_db=args.fixed_snr_db,
                  snr_db_range=args.snr_range, reverb_prob=args.reverb_prob)

    from .audio.corpus import AugmentConfig, make_corpus

    augment = AugmentConfig(noise_prob=args.noise_prob,
                            snr_db_range=tuple(args.snr_range),
                            fixed_snr_db=args.fixed_snr_db,
                            reverb_prob=args.reverb_prob)
    records = make_corpus(out, args.count, seed, augment=augment,
                          durations_s=tuple(args.durations),
                          sample_rate_hz=args.sample_rate)
    print(json.dumps({"out": str(out), "utterances": len(records)}))
    return EXIT_OK


def cmd_train_codec(args) -> int:
    if args.stage == 1:
        return _run_one_stage(args, "stage1",
                              stage1_steps=args.steps, stage1_batch=args.batch)
    return _run_one_stage(args, "stage2",
                          stage2_steps=args.steps, stage2_batch=args.batch)


def cmd_reorg(args) -> int:
    from .codec import reorganize_checkpoint

    ckpt = _require_file(Path(args.ckpt), "checkpoint")
    out = Path(args.out)
    _refuse_existing(out, args.force, "checkpoint")
    _log_resolved(args.command, ckpt=ckpt, out=out, n=args.n, k=args.k)
    info = reorganize_checkpoint(ckpt, out, n=args.n, k=args.k)
    print(json.dumps(info, sort_keys=True, default=str))
    return EXIT_OK


def cmd_fit_kmeans(args) -> int:
    return _run_one_stage(args, "kmeans", kmeans_k=args.k, kmeans_iters=args.iters)


def cmd_train_n2s(args) -> int:
    return _run_one_stage(args, "n2s", n2s_steps=args.steps, lm_batch=args.batch)


def cmd_train_s2s(args) -> int:
    if args.no_chain_prompt:
        stage = "s2s_no_chain"
    elif args.single_lm:
        stage = "single_lm"
    else:
        stage = "s2s"
    return _run_one_stage(args, stage, s2s_steps=args.steps, lm_batch=args.batch)


def cmd_enhance(args) -> int:
    config = load_run_config(args.config)
    seed = resolve_seed(args.seed, config)
    sampling, top_k, temperature = resolve_sampling(args, config)
    in_path = _require_file(Path(args.in_path), "input wav")
    out_path = Path(args.out)
    _refuse_existing(out_path, args.force, "output wav")
    _log_resolved(args.command, bundle=args.bundle, in_path=in_path, out=out_path,
                  mode=args.mode, sampling=sampling, top_k=top_k,
                  temperature=temperature, seed=seed,
                  dump_intermediates=args.dump_intermediates)

    import numpy as np

    from .audio.waveform import read_wav, write_wav
    from .pipeline import enhance_detailed, load_bundle
    from .semantic import write_token_file

    bundle = load_bundle(args.bundle)
    noisy = read_wav(in_path)
    rng = np.random.default_rng(seed) if sampling == "topk" else None
    result = enhance_detailed(noisy, bundle, mode=args.mode, sampling=sampling,
                              top_k=top_k, temperature=temperature, rng=rng)
    write_wav(out_path, result.wave)

    written = [str(out_path)]
    if args.dump_intermediates:
        streams = (("noisy_semantic", result.noisy_semantic),
                   ("clean_semantic", result.clean_semantic),
                   ("noisy_acoustic", result.noisy_acoustic),
                   ("clean_acoustic", result.clean_acoustic))
        stem = out_path.with_suffix("")
        for name, ids in streams:
            if ids is None:  # ablation modes skip some stages
                continue
            token_path = Path(f"{stem}.{name}.tokens")
            write_token_file(token_path, [list(ids)])
            written.append(str(token_path))
    print(json.dumps({"out": str(out_path), "samples": int(result.wave.samples.size),
                      "mode": args.mode, "files": written}))
    return EXIT_OK


def cmd_eval(args) -> int:
    config = load_run_config(args.config)
    seed = resolve_seed(args.seed, config)
    sampling, top_k, temperature = resolve_sampling(args, config)
    corpus = _require_corpus(args.corpus)
    out_path = Path(args.out)
    _refuse_existing(out_path, args.force, "report")
    _log_resolved(args.command, bundle=args.bundle, corpus=corpus, out=out_path,
                  mode=args.mode, sampling=sampling, top_k=top_k,
                  temperature=temperature, seed=seed, limit=args.limit)

    import numpy as np

    from .evals import MetricReport, evaluate_codec, evaluate_enhancement
    from .pipeline import CODEC_STAGE2, ENHANCE_MODES, load_bundle

    if args.mode == "codec":
        from .codec import load_codec

        ckpt = _require_file(Path(args.bundle) / CODEC_STAGE2, "codec checkpoint")
        codec, _ = load_codec(ckpt)
        report = evaluate_codec(codec, corpus, limit=args.limit)
    else:
        bundle = load_bundle(args.bundle)
        modes = ("full",) if args.mode == "pipeline" else ENHANCE_MODES
        report = MetricReport()
        for mode in modes:
            rng = np.random.default_rng(seed) if sampling == "topk" else None
            part = evaluate_enhancement(bundle, corpus, mode=mode,
                                        sampling=sampling, top_k=top_k,
                                        temperature=temperature, rng=rng,
                                        limit=args.limit)
            report.records.extend(part.records)

    report.to_csv(out_path)
    print(json.dumps({"out": str(out_path), "records": len(report),
                      "aggregates": report.aggregates()},
                     sort_keys=True, default=str))
    return EXIT_OK


def cmd_usage_sweep(args) -> int:
    config = load_run_config(args.config)
    seed = resolve_seed(args.seed, config)
    ckpt = _require_file(Path(args.ckpt), "codec checkpoint")
    corpus = _require_corpus(args.corpus)
    out_path = Path(args.out)
    _refuse_existing(out_path, args.force, "report")
    if args.svg is not None:
        _refuse_existing(Path(args.svg), args.force, "plot")
    _log_resolved(args.command, ckpt=ckpt, corpus=corpus, out=out_path,
                  svg=args.svg, sizes=args.sizes, steps=args.steps,
                  batch=args.batch, limit=args.limit, seed=seed)

    from .audio.corpus import read_manifest
    from .audio.waveform import read_wav
    from .codec import load_codec
    from .evals import encoder_latents, usage_sweep

    codec, _ = load_codec(ckpt)
    records = read_manifest(corpus / "manifest.tsv")[:args.limit]
    waves = [read_wav(corpus / rec.clean_path) for rec in records]
    rows = usage_sweep(encoder_latents(codec, waves), args.sizes,
                       steps=args.steps, batch=args.batch, seed=seed,
                       csv_path=out_path, svg_path=args.svg)
    print(json.dumps({"out": str(out_path), "rows": rows}, sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------------ parser ---

def _int_list(text: str) -> list:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_common(parser, config: bool = True) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (default: ${ENV_SEED}, then config, then 0)")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"cap numeric thread pools (default: ${ENV_THREADS})")
    parser.add_argument("--force", action="store_true",
                        help="overwrite outputs that already exist")
    parser.add_argument("--verbose", action="store_true",
                        help="print progress while running")
    if config:
        parser.add_argument("--config", default=None, metavar="YAML",
                            help="run configuration file (sections: codec, lm, "
                                 "training, sampling)")


def _add_stage_io(parser) -> None:
    parser.add_argument("--corpus", required=True, help="corpus directory (with manifest.tsv)")
    parser.add_argument("--out", required=True, help="output directory for checkpoints and logs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokse",
        description="Token-based speech enhancement: synthesize data, train the "
                    "codec/tokenizer/LMs stage by stage, enhance wavs, and score results.",
        epilog="Exit codes: 0 ok, 1 runtime failure, 2 usage, 3 missing input, "
               "4 bad config, 5 output exists (use --force) or unwritable.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("gen-data", help="render a paired clean/degraded corpus")
    p.add_argument("--out", required=True, help="corpus directory to create")
    p.add_argument("--count", type=int, default=40, help="number of utterances (default 40)")
    p.add_argument("--durations", type=_float_list, default=[1.0],
                   help="comma-separated utterance lengths in seconds (default 1.0)")
    p.add_argument("--sample-rate", type=int, default=16000, help="sample rate in Hz")
    p.add_argument("--noise-prob", type=float, default=0.8,
                   help="probability an utterance gets additive noise (default 0.8)")
    p.add_argument("--snr-range", type=_float_list, default=[-5.0, 20.0],
                   help="SNR range in dB as lo,hi (default -5,20)")
    p.add_argument("--fixed-snr-db", type=float, default=None,
                   help="pin every noisy utterance to this SNR instead of the range")
    p.add_argument("--reverb-prob", type=float, default=0.5,
                   help="probability an utterance gets reverberation (default 0.5)")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-codec", help="train the waveform codec (stage 1 or 2)")
    p.add_argument("--stage", type=int, choices=(1, 2), required=True,
                   help="1: grouped books from scratch; 2: continue from the merged book")
    _add_stage_io(p)
    p.add_argument("--steps", type=int, default=None, help="training steps")
    p.add_argument("--batch", type=int, default=None, help="batch size")
    _add_common(p)
    p.set_defaults(func=cmd_train_codec)

    p = sub.add_parser("reorg", help="merge a stage-1 checkpoint's books into one "
                                     "n*k codebook (no training)")
    p.add_argument("--ckpt", required=True, help="stage-1 codec checkpoint")
    p.add_argument("--out", required=True, help="merged checkpoint to write")
    p.add_argument("--n", type=int, default=None, help="codes kept from the first book")
    p.add_argument("--k", type=int, default=None, help="codes kept from the second book")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_reorg)

    p = sub.add_parser("fit-kmeans", help="fit the semantic token vocabulary")
    _add_stage_io(p)
    p.add_argument("--k", type=int, default=None, help="number of semantic clusters")
    p.add_argument("--iters", type=int, default=None, help="refinement iterations")
    _add_common(p)
    p.set_defaults(func=cmd_fit_kmeans)

    p = sub.add_parser("train-n2s", help="train the noisy-to-clean semantic token LM")
    _add_stage_io(p)
    p.add_argument("--steps", type=int, default=None, help="training steps")
    p.add_argument("--batch", type=int, default=None, help="batch size")
    _add_common(p)
    p.set_defaults(func=cmd_train_n2s)

    p = sub.add_parser("train-s2s", help="train the semantic-to-acoustic token LM")
    _add_stage_io(p)
    p.add_argument("--steps", type=int, default=None, help="training steps")
    p.add_argument("--batch", type=int, default=None, help="batch size")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--no-chain-prompt", action="store_true",
                       help="ablation: drop the noisy streams from the prompt")
    group.add_argument("--single-lm", action="store_true",
                       help="ablation: one deeper LM straight from noisy semantics "
                            "to clean acoustics")
    _add_common(p)
    p.set_defaults(func=cmd_train_s2s)

    p = sub.add_parser("enhance", help="enhance one wav through a trained bundle")
    p.add_argument("--bundle", required=True, help="directory holding the trained artifacts")
    p.add_argument("--in", dest="in_path", required=True, help="noisy input wav")
    p.add_argument("--out", required=True, help="enhanced output wav")
    p.add_argument("--mode", choices=("full", "no_chain_prompt", "single_lm"),
                   default="full", help="pipeline variant (default full)")
    p.add_argument("--sampling", choices=SAMPLING_MODES, default=None,
                   help="token decoding strategy (default greedy)")
    p.add_argument("--top-k", type=int, default=None, help="candidates kept under topk")
    p.add_argument("--temperature", type=float, default=None,
                   help="softmax temperature under topk")
    p.add_argument("--dump-intermediates", action="store_true",
                   help="also write the intermediate token streams next to the output")
    _add_common(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="score a trained system over a corpus, writing a CSV")
    p.add_argument("--bundle", required=True, help="directory holding the trained artifacts")
    p.add_argument("--corpus", required=True, help="corpus directory to score on")
    p.add_argument("--out", required=True, help="CSV report to write")
    p.add_argument("--mode", choices=("codec", "pipeline", "ablation"), required=True,
                   help="codec: round-trip fidelity; pipeline: full enhancement; "
                        "ablation: all three pipeline variants")
    p.add_argument("--limit", type=int, default=None, help="score only the first N utterances")
    p.add_argument("--sampling", choices=SAMPLING_MODES, default=None,
                   help="token decoding strategy (default greedy)")
    p.add_argument("--top-k", type=int, default=None, help="candidates kept under topk")
    p.add_argument("--temperature", type=float, default=None,
                   help="softmax temperature under topk")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("usage-sweep", help="codebook utilization versus size "
                                           "on a checkpoint's encoder latents")
    p.add_argument("--ckpt", required=True, help="codec checkpoint (either stage)")
    p.add_argument("--corpus", required=True, help="corpus whose clean side feeds the encoder")
    p.add_argument("--sizes", type=_int_list, required=True,
                   help="comma-separated codebook sizes, e.g. 64,256,1024")
    p.add_argument("--out", required=True, help="CSV report to write")
    p.add_argument("--svg", default=None, help="also write a line plot here")
    p.add_argument("--steps", type=int, default=200, help="EMA steps per size (default 200)")
    p.add_argument("--batch", type=int, default=1024, help="latent frames per step (default 1024)")
    p.add_argument("--limit", type=int, default=None, help="use only the first N utterances")
    _add_common(p)
    p.set_defaults(func=cmd_usage_sweep)

    return parser


# -------------------------------------------------------------------- main ---

def _classify(exc: BaseException) -> int:
    if isinstance(exc, CliError):
        return exc.code
    if isinstance(exc, FileNotFoundError):
        return EXIT_MISSING_ARTIFACT
    if isinstance(exc, PermissionError):
        return EXIT_UNWRITABLE
    try:
        from .grad.optim import TrainingDiverged
        from .pipeline import BundleError, PlanError, StageError
    except Exception:
        return EXIT_FAILURE
    if isinstance(exc, BundleError):
        return EXIT_MISSING_ARTIFACT
    if isinstance(exc, PlanError):
        return EXIT_MISSING_ARTIFACT if "missing" in str(exc) else EXIT_BAD_CONFIG
    if isinstance(exc, (StageError, TrainingDiverged)):
        return EXIT_FAILURE
    if isinstance(exc, (ValueError, KeyError, TypeError)):
        return EXIT_BAD_CONFIG
    return EXIT_FAILURE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse printed its own message
        return int(exc.code or 0)
    try:
        threads = resolve_threads(args.threads)
        if threads is not None:
            _apply_threads(threads)
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _classify(exc)


if __name__ == "__main__":
    sys.exit(main())
