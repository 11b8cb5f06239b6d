"""Corpus synthesis: WAV I/O, SNR mixing, normalization statistics.

Mixtures are materialized from a manifest of (speech, noise, snr_db, seed,
output) lines.  Per-bin normalization statistics come from the training
noisy log-power spectra only, so a validation file change never moves them.
"""
from __future__ import annotations

import csv
import os
import struct
import tempfile
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .dsp import (
    LpsSequence,
    StftConfig,
    Waveform,
    decompose,
    lps_from_magnitude,
    stft,
)

PCM_SCALE = 32768.0
STD_FLOOR = 1e-5
STATS_MAGIC = b"RTSNSTAT"
STATS_VERSION = 1
PEAK_TARGET = 0.999

# ---------------------------------------------------------------------------
# WAV I/O (16-bit PCM mono only)
# ---------------------------------------------------------------------------


def read_wav(path: str | os.PathLike) -> Waveform:
    """Read a 16-bit PCM mono WAV file into floats in [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as f:
            channels = f.getnchannels()
            width = f.getsampwidth()
            rate = f.getframerate()
            raw = f.readframes(f.getnframes())
    except wave.Error as e:
        raise ValueError(f"{path}: unsupported wav encoding ({e})") from e
    if channels != 1:
        raise ValueError(f"{path}: channels={channels} unsupported (need mono)")
    if width != 2:
        raise ValueError(
            f"{path}: sample width {8 * width} bits unsupported (need 16-bit PCM)"
        )
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return Waveform(samples, rate)


def write_wav(path: str | os.PathLike, w: Waveform) -> None:
    """Write 16-bit PCM mono, rounding half away from zero and clipping.

    The file appears atomically: a temp file in the same directory is
    renamed over the target only after a complete write.
    """
    x = w.samples * PCM_SCALE
    q = np.trunc(x + np.copysign(0.5, x))
    q = np.clip(q, -32768, 32767).astype("<i2")
    _atomic_write(path, _encode_wav(q, w.sample_rate_hz))


def _encode_wav(pcm: np.ndarray, rate: int) -> bytes:
    import io

    buf = io.BytesIO()
    with wave.open(buf, "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(rate)
        f.writeframes(pcm.tobytes())
    return buf.getvalue()


def _atomic_write(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# SNR mixing
# ---------------------------------------------------------------------------


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def mix_with_reference(
    speech: Waveform, noise: Waveform, snr_db: float, seed: int
) -> tuple[Waveform, Waveform]:
    """Mix noise into speech at a target SNR; return (mixture, clean ref).

    The seed fully determines the noise segment offset (wrapping when the
    noise is shorter than the speech).  If the raw sum peaks above 1, both
    the mixture and the clean reference are rescaled by the same factor so
    the mixture peaks at 0.999; the pair therefore stays at the target SNR.
    """
    if speech.sample_rate_hz != noise.sample_rate_hz:
        raise ValueError(
            f"sample rate mismatch: speech {speech.sample_rate_hz}, "
            f"noise {noise.sample_rate_hz}"
        )
    s = speech.samples
    if s.size == 0:
        raise ValueError("empty speech signal")
    if noise.samples.size == 0:
        raise ValueError("empty noise signal")
    speech_rms = _rms(s)
    if speech_rms == 0.0:
        raise ValueError("silent speech (RMS = 0)")
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(0, noise.samples.size))
    idx = (offset + np.arange(s.size)) % noise.samples.size
    segment = noise.samples[idx]
    seg_rms = _rms(segment)
    if seg_rms == 0.0:
        raise ValueError("silent noise segment (RMS = 0)")
    gain = (speech_rms / seg_rms) * 10.0 ** (-snr_db / 20.0)
    mixture = s + gain * segment
    clean = s.copy()
    peak = float(np.max(np.abs(mixture)))
    if peak > 1.0:
        factor = PEAK_TARGET / peak
        mixture = mixture * factor
        clean = clean * factor
    rate = speech.sample_rate_hz
    return Waveform(mixture, rate), Waveform(clean, rate)


def mix_at_snr(speech: Waveform, noise: Waveform, snr_db: float, seed: int) -> Waveform:
    """Mixture half of :func:`mix_with_reference`."""
    return mix_with_reference(speech, noise, snr_db, seed)[0]


# ---------------------------------------------------------------------------
# normalization statistics
# ---------------------------------------------------------------------------


@dataclass
class NormStats:
    """Per-bin mean and (floored) population standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError(
                f"mean/std must be equal-length vectors, got "
                f"{self.mean.shape} and {self.std.shape}"
            )
        if self.std.size and self.std.min() <= 0:
            raise ValueError("non-positive std")


def compute_norm_stats(sequences: Iterable[LpsSequence]) -> NormStats:
    """Streaming per-bin mean/std over all frames of all sequences."""
    count = 0
    total = None
    total_sq = None
    for seq in sequences:
        v = seq.values
        if total is None:
            total = np.zeros(v.shape[1])
            total_sq = np.zeros(v.shape[1])
        elif v.shape[1] != total.shape[0]:
            raise ValueError(
                f"bin count mismatch: {v.shape[1]} vs {total.shape[0]}"
            )
        count += v.shape[0]
        total += v.sum(axis=0)
        total_sq += (v * v).sum(axis=0)
    if count == 0:
        raise ValueError("no frames to compute statistics from")
    mean = total / count
    var = np.maximum(total_sq / count - mean * mean, 0.0)
    std = np.maximum(np.sqrt(var), STD_FLOOR)
    return NormStats(mean, std)


def normalize(l: LpsSequence, stats: NormStats) -> LpsSequence:
    if l.values.shape[1] != stats.mean.shape[0]:
        raise ValueError(
            f"bin count mismatch: {l.values.shape[1]} vs {stats.mean.shape[0]}"
        )
    return LpsSequence((l.values - stats.mean) / stats.std)


def denormalize(l: LpsSequence, stats: NormStats) -> LpsSequence:
    if l.values.shape[1] != stats.mean.shape[0]:
        raise ValueError(
            f"bin count mismatch: {l.values.shape[1]} vs {stats.mean.shape[0]}"
        )
    return LpsSequence(l.values * stats.std + stats.mean)


def save_norm_stats(path: str | os.PathLike, stats: NormStats) -> None:
    """Binary stats file: magic, u32 version, f64 means then f64 stds (LE)."""
    payload = (
        STATS_MAGIC
        + struct.pack("<I", STATS_VERSION)
        + stats.mean.astype("<f8").tobytes()
        + stats.std.astype("<f8").tobytes()
    )
    _atomic_write(path, payload)


def load_norm_stats(path: str | os.PathLike) -> NormStats:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != STATS_MAGIC:
        raise ValueError(f"{path}: not a stats file (bad magic)")
    (version,) = struct.unpack("<I", data[8:12])
    if version != STATS_VERSION:
        raise ValueError(f"{path}: unsupported stats version {version}")
    body = data[12:]
    if len(body) % 16 != 0:
        raise ValueError(f"{path}: truncated stats payload")
    n = len(body) // 16
    values = np.frombuffer(body, dtype="<f8")
    return NormStats(values[:n].copy(), values[n:].copy())


# ---------------------------------------------------------------------------
# manifest and corpus build
# ---------------------------------------------------------------------------


@dataclass
class MixtureSpec:
    speech_path: str
    noise_path: str
    snr_db: float
    seed: int
    output_path: str
    line: int = 0  # 1-based manifest line, for diagnostics


def clean_path_for(output_path: str) -> str:
    """Clean-reference path paired with a mixture output path."""
    if output_path.endswith(".wav"):
        return output_path[:-4] + "_clean.wav"
    return output_path + "_clean.wav"


def parse_manifest(path: str | os.PathLike) -> list[MixtureSpec]:
    """Parse manifest CSV lines: speech,noise,snr_db,seed,output."""
    specs = []
    with open(path, newline="", encoding="utf-8") as f:
        for ln, row in enumerate(csv.reader(f), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise ValueError(
                    f"manifest line {ln}: expected 5 fields, got {len(row)}"
                )
            speech, noise, snr, seed, out = (c.strip() for c in row)
            try:
                snr_db = float(snr)
            except ValueError:
                raise ValueError(
                    f"manifest line {ln}: bad snr_db {snr!r}"
                ) from None
            try:
                seed_val = int(seed)
            except ValueError:
                raise ValueError(f"manifest line {ln}: bad seed {seed!r}") from None
            if not speech or not noise or not out:
                raise ValueError(f"manifest line {ln}: empty path field")
            specs.append(MixtureSpec(speech, noise, snr_db, seed_val, out, ln))
    if not specs:
        raise ValueError(f"{path}: empty manifest")
    return specs


@dataclass
class Corpus:
    """Materialized corpus: (noisy, clean) path pairs plus stats."""

    train_pairs: list[tuple[str, str]]
    val_pairs: list[tuple[str, str]]
    stats: NormStats
    stats_path: str
    split_path: str


def _resolve(base: Path, p: str) -> str:
    q = Path(p)
    return str(q if q.is_absolute() else base / q)


def split_indices(n: int, seed: int) -> tuple[list[int], list[int]]:
    """Seeded 90/10 train/validation split; validation gets at least one."""
    if n < 2:
        raise ValueError(f"need at least 2 manifest entries for a split, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = max(1, n // 10)
    val = sorted(int(i) for i in perm[:n_val])
    train = sorted(int(i) for i in perm[n_val:])
    return train, val


def build_corpus(
    manifest_path: str | os.PathLike,
    stft_config: StftConfig | None = None,
    seed: int = 0,
    out_dir: str | os.PathLike | None = None,
) -> Corpus:
    """Materialize mixtures, write the split and training-set statistics."""
    stft_config = stft_config or StftConfig()
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    out_dir = Path(out_dir) if out_dir is not None else base
    specs = parse_manifest(manifest_path)
    train_idx, val_idx = split_indices(len(specs), seed)

    pairs = []
    for spec in specs:
        try:
            speech = read_wav(_resolve(base, spec.speech_path))
            noise = read_wav(_resolve(base, spec.noise_path))
            mixture, clean = mix_with_reference(speech, noise, spec.snr_db, spec.seed)
        except (OSError, ValueError) as e:
            raise ValueError(f"manifest line {spec.line}: {e}") from e
        noisy_path = _resolve(base, spec.output_path)
        clean_path = clean_path_for(noisy_path)
        write_wav(noisy_path, mixture)
        write_wav(clean_path, clean)
        pairs.append((noisy_path, clean_path))

    def train_lps() -> Iterator[LpsSequence]:
        for i in train_idx:
            noisy = read_wav(pairs[i][0])
            yield lps_from_magnitude(decompose(stft(noisy, stft_config))[0])

    stats = compute_norm_stats(train_lps())
    stats_path = out_dir / "stats.bin"
    save_norm_stats(stats_path, stats)

    split_lines = []
    roles = {i: "train" for i in train_idx}
    roles.update({i: "val" for i in val_idx})
    for i, spec in enumerate(specs):
        split_lines.append(f"{spec.output_path},{roles[i]}")
    split_path = out_dir / "split.csv"
    _atomic_write(split_path, ("\n".join(split_lines) + "\n").encode("utf-8"))

    return Corpus(
        train_pairs=[pairs[i] for i in train_idx],
        val_pairs=[pairs[i] for i in val_idx],
        stats=stats,
        stats_path=str(stats_path),
        split_path=str(split_path),
    )


def load_corpus(
    manifest_path: str | os.PathLike, out_dir: str | os.PathLike | None = None
) -> Corpus | None:
    """Reload a previously built corpus; None if any artifact is missing."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    out_dir = Path(out_dir) if out_dir is not None else base
    stats_path = out_dir / "stats.bin"
    split_path = out_dir / "split.csv"
    if not stats_path.exists() or not split_path.exists():
        return None
    roles = {}
    for line in split_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        out, _, role = line.rpartition(",")
        roles[out] = role
    specs = parse_manifest(manifest_path)
    train_pairs, val_pairs = [], []
    for spec in specs:
        role = roles.get(spec.output_path)
        if role not in ("train", "val"):
            return None
        noisy = _resolve(base, spec.output_path)
        clean = clean_path_for(noisy)
        if not os.path.exists(noisy) or not os.path.exists(clean):
            return None
        (train_pairs if role == "train" else val_pairs).append((noisy, clean))
    if not train_pairs or not val_pairs:
        return None
    return Corpus(train_pairs, val_pairs, load_norm_stats(stats_path),
                  str(stats_path), str(split_path))
