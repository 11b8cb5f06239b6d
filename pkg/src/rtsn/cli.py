"""Command-line front end: mix, build-corpus, train, enhance, eval, spectrogram.

Every command exits 0 on success and nonzero with a one-line diagnostic on
standard error otherwise.  Output files are written to a temp file and
renamed, so failures leave no partial artifacts.  RTSN_THREADS caps the
numeric library thread pools (default 1 for run-to-run determinism).
"""
from __future__ import annotations

import os

_THREADS = os.environ.get("RTSN_THREADS", "1")
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, _THREADS)

import argparse
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import evalkit
from .dsp import StftConfig, decompose, lps_from_magnitude, stft
from .model import (
    RtsnConfig,
    enhance_utterance,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .trainer import TrainConfig, train

_MODEL_KEYS = {
    "lookahead": int,
    "prior_weight": float,
    "lstm_units": int,
    "lstm_layers": int,
    "conv_kernel": int,
    "conv_channels": lambda s: tuple(int(x) for x in s.split(",")),
    "gla_iters": int,
}
_STFT_KEYS = {"frame_len": int, "hop": int, "fft_size": int}
_TRAIN_KEYS = {
    "unroll_steps": int,
    "utterances_per_batch": int,
    "learning_rate": float,
    "max_epochs": int,
    "patience": int,
}


def parse_config_file(path: str) -> dict[str, str]:
    """Parse `key = value` lines; `#` starts a comment; unknown keys error."""
    known = set(_MODEL_KEYS) | set(_STFT_KEYS) | set(_TRAIN_KEYS)
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ValueError(f"{path} line {ln}: expected `key = value`, got {raw!r}")
        if key not in known:
            raise ValueError(f"{path} line {ln}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"{path} line {ln}: duplicate key {key!r}")
        values[key] = value
    return values


def _typed(values: dict[str, str], schema: dict, path: str) -> dict:
    out = {}
    for key, convert in schema.items():
        if key in values:
            try:
                out[key] = convert(values[key])
            except ValueError:
                raise ValueError(
                    f"{path}: bad value {values[key]!r} for key {key!r}"
                ) from None
    return out


def load_train_setup(path: str, seed: int) -> tuple[RtsnConfig, StftConfig, TrainConfig]:
    values = parse_config_file(path)
    stft_config = StftConfig(**_typed(values, _STFT_KEYS, path))
    model_kwargs = _typed(values, _MODEL_KEYS, path)
    model_config = RtsnConfig(n_bins=stft_config.n_bins, **model_kwargs)
    train_config = TrainConfig(seed=seed, **_typed(values, _TRAIN_KEYS, path))
    return model_config, stft_config, train_config


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_mix(args: argparse.Namespace) -> int:
    speech = corpus_mod.read_wav(args.speech)
    noise = corpus_mod.read_wav(args.noise)
    mixture, clean = corpus_mod.mix_with_reference(speech, noise, args.snr, args.seed)
    err = mixture.samples - clean.samples
    snr_db = 10.0 * np.log10(np.sum(clean.samples**2) / np.sum(err**2))
    corpus_mod.write_wav(args.out, mixture)
    print(f"snr_db={snr_db:.6f}")
    return 0


def cmd_build_corpus(args: argparse.Namespace) -> int:
    built = corpus_mod.build_corpus(
        args.manifest,
        StftConfig(),
        seed=args.seed,
        out_dir=args.out_dir,
    )
    print(f"train={len(built.train_pairs)}")
    print(f"val={len(built.val_pairs)}")
    print(f"stats={built.stats_path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    model_config, stft_config, train_config = load_train_setup(args.config, args.seed)
    out_dir = Path(args.manifest).parent
    corpus = corpus_mod.load_corpus(args.manifest, out_dir)
    if corpus is None:
        corpus = corpus_mod.build_corpus(args.manifest, stft_config,
                                         seed=args.seed, out_dir=out_dir)
    params = init_params(model_config, stft_config, corpus.stats, seed=args.seed)
    result = train(params, corpus, train_config)
    save_checkpoint(result.params, args.out)
    log_lines = ["epoch,train_loss,val_loss,seconds"]
    for row in result.log:
        log_lines.append(
            f"{row.epoch},{row.train_loss:.8f},{row.val_loss:.8f},{int(row.seconds)}"
        )
    corpus_mod._atomic_write(str(args.out) + ".log.csv",
                             ("\n".join(log_lines) + "\n").encode("utf-8"))
    print(f"epochs={len(result.log)}")
    print(f"best_epoch={result.best_epoch}")
    print(f"best_val_loss={result.log[result.best_epoch - 1].val_loss!r}")
    return 0


def cmd_enhance(args: argparse.Namespace) -> int:
    params = load_checkpoint(args.model)
    noisy = corpus_mod.read_wav(args.infile)
    enhanced, _ = enhance_utterance(params, noisy, gla_iters=args.gla)
    corpus_mod.write_wav(args.out, enhanced)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    ref = corpus_mod.read_wav(args.ref)
    deg = corpus_mod.read_wav(args.deg)
    cfg = StftConfig()
    ref_lps = lps_from_magnitude(decompose(stft(ref, cfg))[0])
    deg_lps = lps_from_magnitude(decompose(stft(deg, cfg))[0])
    print(f"snr={float(evalkit.global_snr(ref, deg))!r}")
    print(f"seg_snr={float(evalkit.segmental_snr(ref, deg))!r}")
    print(f"lsd={float(evalkit.log_spectral_distance(ref_lps, deg_lps))!r}")
    return 0


def cmd_spectrogram(args: argparse.Namespace) -> int:
    w = corpus_mod.read_wav(args.infile)
    evalkit.emit_spectrogram_image(w, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtsn", description="Recurrent two-stage speech enhancement toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mix", help="mix speech and noise at a target SNR")
    p.add_argument("--speech", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("build-corpus", help="materialize mixtures from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("train", help="train a model from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance a noisy wav with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gla", type=int, default=None,
                   help="Griffin-Lim iterations (default: model config)")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="objective metrics between two wavs")
    p.add_argument("--ref", required=True)
    p.add_argument("--deg", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("spectrogram", help="write a PGM spectrogram image")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrogram)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
