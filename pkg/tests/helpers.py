"""Shared test oracles, reimplemented independently of the package internals."""
import math

import numpy as np

SAMPLE_RATE = 8000


def hann_by_formula(n: int) -> np.ndarray:
    k = np.arange(n, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def reflect_pad(x: np.ndarray, pad: int) -> np.ndarray:
    """Reflect padding without the edge sample repeated, by explicit indexing."""
    left = [x[pad - i] for i in range(pad)]
    right = [x[x.size - 2 - j] for j in range(pad)]
    return np.concatenate([left, x, right])


def naive_dft(frame: np.ndarray, fft_size: int) -> np.ndarray:
    """O(n^2) real-input DFT, one explicit sum per output bin."""
    n_bins = fft_size // 2 + 1
    padded = np.zeros(fft_size, dtype=np.float64)
    padded[: frame.size] = frame
    out = np.zeros(n_bins, dtype=np.complex128)
    for k in range(n_bins):
        acc = 0.0 + 0.0j
        for n in range(fft_size):
            acc += padded[n] * np.exp(-2j * np.pi * k * n / fft_size)
        out[k] = acc
    return out


def naive_stft(x: np.ndarray, frame_len: int, hop: int, fft_size: int) -> np.ndarray:
    padded = reflect_pad(np.asarray(x, dtype=np.float64), frame_len // 2)
    window = hann_by_formula(frame_len)
    num_frames = 1 + (padded.size - frame_len) // hop
    out = np.zeros((num_frames, fft_size // 2 + 1), dtype=np.complex128)
    for t in range(num_frames):
        out[t] = naive_dft(padded[t * hop : t * hop + frame_len] * window, fft_size)
    return out


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))


def fd_gradient(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f at x, element by element."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = f(x)
        flat[i] = keep - eps
        lo = f(x)
        flat[i] = keep
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def synth_voice(seed: int, num_samples: int = SAMPLE_RATE,
                rate: int = SAMPLE_RATE) -> np.ndarray:
    """Speech-like test signal: a few modulated tones over a faint noise bed.

    The noise bed keeps every frequency bin away from the log-power floor so
    z-scored features stay well conditioned.  Peak amplitude 0.5.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(num_samples) / rate
    x = np.zeros(num_samples)
    for _ in range(int(rng.integers(3, 8))):
        freq = float(rng.uniform(150.0, 3400.0))
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        am_rate = float(rng.uniform(1.0, 6.0))
        am = 0.55 + 0.45 * np.sin(2.0 * np.pi * am_rate * t + float(rng.uniform(0, 7)))
        x += float(rng.uniform(0.3, 1.0)) * am * np.sin(2.0 * np.pi * freq * t + phase)
    x += 0.01 * rng.standard_normal(num_samples)
    return 0.5 * x / np.max(np.abs(x))


def synth_noise(seed: int, num_samples: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(num_samples)
    return 0.35 * x / np.max(np.abs(x))
