"""Recurrent two-stage enhancement network.

Stage one (the prior network) runs a unidirectional LSTM over windows of
noisy log-power frames and emits, per step, a stack of 2*lookahead+1 base
predictions covering frames t-lookahead..t+lookahead.  Stage two (the
posterior network) collects every stack overlapping frame t together with
the noisy frames themselves into a channel image and reduces it to one
enhanced frame with 1-D convolutions over frequency.  Training minimizes
the posterior error plus prior_weight times the stack error.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import neural as nn
from .corpus import NormStats, denormalize, normalize
from .dsp import (
    LpsSequence,
    StftConfig,
    Waveform,
    decompose,
    lps_from_magnitude,
    magnitude_from_lps,
    stft,
)
from .gla import GlaConfig, griffin_lim

CHECKPOINT_MAGIC = b"RTSNCKPT"
CHECKPOINT_VERSION = 1

# ---------------------------------------------------------------------------
# configuration and parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RtsnConfig:
    lookahead: int = 4
    prior_weight: float = 10.0
    n_bins: int = 129
    lstm_layers: int = 2
    lstm_units: int = 512
    conv_kernel: int = 5
    conv_channels: tuple[int, ...] = (256, 128, 64, 1)
    gla_iters: int = 5

    def __post_init__(self) -> None:
        if self.lookahead < 1:
            raise ValueError(f"lookahead must be >= 1, got {self.lookahead}")
        if self.prior_weight < 0:
            raise ValueError(f"prior_weight must be >= 0, got {self.prior_weight}")
        if self.n_bins < 1 or self.lstm_layers < 1 or self.lstm_units < 1:
            raise ValueError("n_bins, lstm_layers, lstm_units must be positive")
        if self.conv_kernel % 2 != 1:
            raise ValueError(f"conv_kernel must be odd, got {self.conv_kernel}")
        if not self.conv_channels or self.conv_channels[-1] != 1:
            raise ValueError(
                f"conv_channels must end in 1, got {self.conv_channels}"
            )
        if self.gla_iters < 0:
            raise ValueError(f"gla_iters must be >= 0, got {self.gla_iters}")

    @property
    def stack_rows(self) -> int:
        return 2 * self.lookahead + 1

    @property
    def pri_input_dim(self) -> int:
        return (self.lookahead + 1) * self.n_bins

    @property
    def posterior_channels(self) -> int:
        r = self.stack_rows
        return r * r + r


@dataclass
class LstmLayerParams:
    w_in: nn.Tensor   # (4H, D)
    w_rec: nn.Tensor  # (4H, H)
    bias: nn.Tensor   # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_rec.shape[1]


@dataclass
class Conv1dParams:
    kernels: nn.Tensor  # (out, in, k)
    bias: nn.Tensor     # (out,)


@dataclass
class RtsnParams:
    config: RtsnConfig
    stft: StftConfig
    lstm: list[LstmLayerParams]
    proj_w: nn.Tensor
    proj_b: nn.Tensor
    convs: list[Conv1dParams]
    norm: NormStats | None = None

    @property
    def dtype(self):
        return self.proj_w.dtype

    def named_tensors(self) -> list[tuple[str, nn.Tensor]]:
        out = []
        for i, layer in enumerate(self.lstm):
            out.append((f"lstm{i}.w_in", layer.w_in))
            out.append((f"lstm{i}.w_rec", layer.w_rec))
            out.append((f"lstm{i}.bias", layer.bias))
        out.append(("proj.weight", self.proj_w))
        out.append(("proj.bias", self.proj_b))
        for i, conv in enumerate(self.convs):
            out.append((f"conv{i}.weight", conv.kernels))
            out.append((f"conv{i}.bias", conv.bias))
        return out

    def copy(self) -> "RtsnParams":
        dup = lambda t: nn.parameter(t.data.copy(), t.name)
        return RtsnParams(
            config=self.config,
            stft=self.stft,
            lstm=[
                LstmLayerParams(dup(l.w_in), dup(l.w_rec), dup(l.bias))
                for l in self.lstm
            ],
            proj_w=dup(self.proj_w),
            proj_b=dup(self.proj_b),
            convs=[Conv1dParams(dup(c.kernels), dup(c.bias)) for c in self.convs],
            norm=self.norm,
        )


def _expected_shapes(config: RtsnConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    h = config.lstm_units
    d = config.pri_input_dim
    for i in range(config.lstm_layers):
        shapes[f"lstm{i}.w_in"] = (4 * h, d if i == 0 else h)
        shapes[f"lstm{i}.w_rec"] = (4 * h, h)
        shapes[f"lstm{i}.bias"] = (4 * h,)
    out_dim = config.stack_rows * config.n_bins
    shapes["proj.weight"] = (out_dim, h)
    shapes["proj.bias"] = (out_dim,)
    prev = config.posterior_channels
    for i, ch in enumerate(config.conv_channels):
        shapes[f"conv{i}.weight"] = (ch, prev, config.conv_kernel)
        shapes[f"conv{i}.bias"] = (ch,)
        prev = ch
    return shapes


def init_params(
    config: RtsnConfig,
    stft_config: StftConfig | None = None,
    norm: NormStats | None = None,
    seed: int = 0,
    dtype=np.float32,
) -> RtsnParams:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.

    Biases start at zero except the LSTM forget gates, which start at one.
    """
    stft_config = stft_config or StftConfig()
    if config.n_bins != stft_config.n_bins:
        raise ValueError(
            f"model expects {config.n_bins} bins but stft yields "
            f"{stft_config.n_bins}"
        )
    rng = np.random.default_rng(seed)

    def uniform(name: str, shape: tuple[int, ...], fan_in: int) -> nn.Tensor:
        bound = 1.0 / np.sqrt(fan_in)
        return nn.parameter(rng.uniform(-bound, bound, shape).astype(dtype), name)

    h = config.lstm_units
    lstm = []
    for i in range(config.lstm_layers):
        d = config.pri_input_dim if i == 0 else h
        bias = np.zeros(4 * h, dtype=dtype)
        bias[h : 2 * h] = 1.0
        lstm.append(
            LstmLayerParams(
                w_in=uniform(f"lstm{i}.w_in", (4 * h, d), d),
                w_rec=uniform(f"lstm{i}.w_rec", (4 * h, h), h),
                bias=nn.parameter(bias, f"lstm{i}.bias"),
            )
        )
    out_dim = config.stack_rows * config.n_bins
    proj_w = uniform("proj.weight", (out_dim, h), h)
    proj_b = nn.parameter(np.zeros(out_dim, dtype=dtype), "proj.bias")
    convs = []
    prev = config.posterior_channels
    for i, ch in enumerate(config.conv_channels):
        convs.append(
            Conv1dParams(
                kernels=uniform(
                    f"conv{i}.weight", (ch, prev, config.conv_kernel),
                    prev * config.conv_kernel,
                ),
                bias=nn.parameter(np.zeros(ch, dtype=dtype), f"conv{i}.bias"),
            )
        )
        prev = ch
    return RtsnParams(config, stft_config, lstm, proj_w, proj_b, convs, norm)


def count_parameters(params: RtsnParams) -> int:
    return sum(int(t.data.size) for _, t in params.named_tensors())


# ---------------------------------------------------------------------------
# assembly helpers
# ---------------------------------------------------------------------------


def _values(lps) -> np.ndarray:
    return lps.values if isinstance(lps, LpsSequence) else np.asarray(lps)


def input_windows(values: np.ndarray, lookahead: int) -> np.ndarray:
    """Per-step prior input: frames t..t+lookahead flattened, edge-replicated."""
    t = values.shape[0]
    idx = np.arange(t)[:, None] + np.arange(lookahead + 1)[None, :]
    idx = np.clip(idx, 0, t - 1)
    return values[idx].reshape(t, -1)


def frame_stack(values: np.ndarray, lookahead: int) -> np.ndarray:
    """Frames t-lookahead..t+lookahead per step, edge-replicated: (T, R, N)."""
    t = values.shape[0]
    idx = np.arange(t)[:, None] + np.arange(-lookahead, lookahead + 1)[None, :]
    idx = np.clip(idx, 0, t - 1)
    return values[idx]


def assemble_pri_input(lps, t: int, lookahead: int) -> np.ndarray:
    """Prior-network input vector for step t: frames t..t+lookahead."""
    values = _values(lps)
    if not 0 <= t < values.shape[0]:
        raise IndexError(f"frame {t} out of range for {values.shape[0]} frames")
    idx = np.clip(np.arange(t, t + lookahead + 1), 0, values.shape[0] - 1)
    return values[idx].reshape(-1)


def gather_mbps(pri_outputs: np.ndarray, t: int) -> np.ndarray:
    """All base predictions of frame t, ordered by offset ascending.

    The offset-m prediction of frame t lives in the stack emitted at step
    t-m (row m+lookahead); steps outside the sequence are edge-replicated.
    """
    pri_outputs = np.asarray(pri_outputs)
    total, rows, _ = pri_outputs.shape
    if not 0 <= t < total:
        raise IndexError(f"frame {t} out of range for {total} frames")
    lookahead = (rows - 1) // 2
    offsets = np.arange(-lookahead, lookahead + 1)
    steps = np.clip(t - offsets, 0, total - 1)
    return pri_outputs[steps, np.arange(rows)]


def assemble_posterior_input(pri_outputs: np.ndarray, noisy, t: int) -> np.ndarray:
    """Posterior channel stack for frame t.

    Channels are every row of the stacks emitted at steps t-lookahead..
    t+lookahead (step ascending, row ascending within a step) followed by
    the noisy frames t-lookahead..t+lookahead; all indices edge-replicated.
    """
    pri_outputs = np.asarray(pri_outputs)
    noisy_values = _values(noisy)
    total, rows, bins = pri_outputs.shape
    if noisy_values.shape != (total, bins):
        raise ValueError(
            f"noisy shape {noisy_values.shape} incompatible with "
            f"prior outputs {pri_outputs.shape}"
        )
    if not 0 <= t < total:
        raise IndexError(f"frame {t} out of range for {total} frames")
    lookahead = (rows - 1) // 2
    offsets = np.arange(-lookahead, lookahead + 1)
    steps = np.clip(t + offsets, 0, total - 1)
    stacks = pri_outputs[steps].reshape(rows * rows, bins)
    return np.concatenate([stacks, noisy_values[steps]], axis=0)


def gather_index(num_steps: int, lookahead: int, valid: int | None = None) -> np.ndarray:
    """Clamped step indices feeding the posterior gather: (num_steps, R)."""
    top = (valid if valid is not None else num_steps) - 1
    idx = np.arange(num_steps)[:, None] + np.arange(-lookahead, lookahead + 1)
    return np.clip(idx, 0, top)


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------


def zero_state(params: RtsnParams, batch: int) -> tuple[list, list]:
    h = [np.zeros((batch, l.hidden), dtype=params.dtype) for l in params.lstm]
    c = [np.zeros((batch, l.hidden), dtype=params.dtype) for l in params.lstm]
    return h, c


@dataclass
class LossOut:
    total: nn.Tensor
    post: float
    pri: float
    frames: float


@dataclass
class ChunkData:
    """Numpy inputs for one batched chunk.

    windows: (B, U, (lookahead+1)*N) prior inputs per step.
    noisy_ctx: (B, U, R, N) noisy frames around each step.
    gather_idx: (B, U, R) clamped local step indices for the posterior.
    clean_frame/clean_stack/mask: training targets, or None for inference.
    """

    windows: np.ndarray
    noisy_ctx: np.ndarray
    gather_idx: np.ndarray
    clean_frame: np.ndarray | None = None
    clean_stack: np.ndarray | None = None
    mask: np.ndarray | None = None


@dataclass
class ChunkResult:
    x_hat: nn.Tensor
    x_bar: nn.Tensor
    state: tuple[list, list]
    loss: LossOut | None


def _pri_graph(params: RtsnParams, windows: np.ndarray,
               state: tuple[list, list]) -> tuple[nn.Tensor, tuple[list, list]]:
    batch, steps, _ = windows.shape
    h = [nn.Tensor(a) for a in state[0]]
    c = [nn.Tensor(a) for a in state[1]]
    tops = []
    for t in range(steps):
        x = nn.Tensor(windows[:, t])
        for i, layer in enumerate(params.lstm):
            hidden = layer.hidden
            hc = nn.lstm_cell(x, h[i], c[i], layer.w_in, layer.w_rec, layer.bias)
            h[i] = hc[:, :hidden]
            c[i] = hc[:, hidden:]
            x = h[i]
        tops.append(nn.reshape(x, (batch, 1, x.shape[1])))
    stacked = nn.concat(tops, axis=1)
    flat = nn.reshape(stacked, (batch * steps, -1))
    proj = nn.linear(flat, params.proj_w, params.proj_b)
    rows = params.config.stack_rows
    x_bar = nn.reshape(proj, (batch, steps, rows, params.config.n_bins))
    state_out = ([t.data.copy() for t in h], [t.data.copy() for t in c])
    return x_bar, state_out


def _conv_stack(params: RtsnParams, v: nn.Tensor) -> nn.Tensor:
    out = v
    last = len(params.convs) - 1
    for i, conv in enumerate(params.convs):
        out = nn.conv1d_freq(out, conv.kernels, conv.bias)
        if i < last:
            out = nn.selu(out)
    return out


def forward_chunk(params: RtsnParams, data: ChunkData,
                  state: tuple[list, list] | None = None) -> ChunkResult:
    """Run both stages over one batched chunk, optionally with the loss."""
    dtype = params.dtype
    windows = data.windows.astype(dtype, copy=False)
    batch, steps, _ = windows.shape
    if state is None:
        state = zero_state(params, batch)
    x_bar, state_out = _pri_graph(params, windows, state)
    gathered = nn.gather_steps(x_bar, data.gather_idx)
    ctx = nn.Tensor(data.noisy_ctx.astype(dtype, copy=False))
    v = nn.concat([gathered, ctx], axis=2)
    channels = params.config.posterior_channels
    flat = nn.reshape(v, (batch * steps, channels, params.config.n_bins))
    conv_out = _conv_stack(params, flat)
    x_hat = nn.reshape(conv_out, (batch, steps, params.config.n_bins))
    loss = None
    if data.clean_frame is not None:
        loss = mol_loss(x_hat, data.clean_frame, x_bar, data.clean_stack,
                        params.config.prior_weight, data.mask)
    return ChunkResult(x_hat, x_bar, state_out, loss)


def mol_loss(pred_frames, target_frames, pred_stacks, target_stacks,
             prior_weight: float, mask: np.ndarray | None = None) -> LossOut:
    """Mean over frames of posterior error plus weighted stack error.

    Per frame: squared distance between the enhanced and clean frame, plus
    prior_weight times the squared Frobenius distance between the emitted
    stack and the clean frame stack.  A mask of zeros drops padded frames
    from both terms.
    """
    pred_frames = nn.as_tensor(pred_frames)
    pred_stacks = nn.as_tensor(pred_stacks)
    dtype = pred_frames.dtype
    target_frames = nn.as_tensor(target_frames, dtype=dtype)
    target_stacks = nn.as_tensor(target_stacks, dtype=dtype)
    post = nn.tsum(nn.square(nn.sub(pred_frames, target_frames)), axis=-1)
    pri = nn.tsum(nn.square(nn.sub(pred_stacks, target_stacks)), axis=(-2, -1))
    if mask is not None:
        m = np.asarray(mask, dtype=dtype)
        count = float(m.sum())
        if count <= 0:
            raise ValueError("mask excludes every frame")
        post = nn.mul(post, nn.Tensor(m))
        pri = nn.mul(pri, nn.Tensor(m))
    else:
        count = float(np.prod(post.shape)) if post.shape else 1.0
    post_sum = nn.tsum(post)
    pri_sum = nn.tsum(pri)
    total = nn.mul(nn.add(post_sum, nn.mul(pri_sum, prior_weight)), 1.0 / count)
    return LossOut(
        total=total,
        post=float(post_sum.data) / count,
        pri=float(pri_sum.data) / count,
        frames=count,
    )


def pri_forward(params: RtsnParams, lps,
                state: tuple[list, list] | None = None
                ) -> tuple[np.ndarray, tuple[list, list]]:
    """Prior-stage output stacks for a whole utterance: (T, R, N)."""
    values = _values(lps).astype(params.dtype, copy=False)
    windows = input_windows(values, params.config.lookahead)
    x_bar, state_out = _pri_graph(params, windows[None], state or zero_state(params, 1))
    return x_bar.data[0], state_out


def post_forward(params: RtsnParams, v: np.ndarray) -> np.ndarray:
    """Posterior-stage output for one assembled channel stack: (N,)."""
    v = np.asarray(v, dtype=params.dtype)
    expected = (params.config.posterior_channels, params.config.n_bins)
    if v.shape != expected:
        raise ValueError(f"posterior input shape {v.shape}, expected {expected}")
    return _conv_stack(params, nn.Tensor(v[None])).data[0, 0]


def enhance_lps(params: RtsnParams, norm_values: np.ndarray) -> np.ndarray:
    """Full-sequence two-stage forward on normalized LPS values."""
    values = np.asarray(norm_values, dtype=params.dtype)
    steps = values.shape[0]
    lookahead = params.config.lookahead
    data = ChunkData(
        windows=input_windows(values, lookahead)[None],
        noisy_ctx=frame_stack(values, lookahead)[None],
        gather_idx=gather_index(steps, lookahead)[None],
    )
    return forward_chunk(params, data).x_hat.data[0]


def enhance_utterance(
    params: RtsnParams,
    noisy: Waveform,
    gla_iters: int | None = None,
    network_fn=None,
) -> tuple[Waveform, LpsSequence]:
    """Enhance a noisy waveform; returns (waveform, enhanced LPS).

    gla_iters overrides the configured iteration count; 0 keeps the noisy
    phase as-is.  network_fn, when given, replaces the network forward with
    a callable mapping normalized LPS values to normalized LPS values
    (useful for pipeline tests).
    """
    if params.norm is None:
        raise ValueError("model has no normalization statistics")
    spec = stft(noisy, params.stft)
    magnitude, phase = decompose(spec)
    noisy_lps = lps_from_magnitude(magnitude)
    norm_values = normalize(noisy_lps, params.norm).values
    if network_fn is not None:
        enhanced_norm = np.asarray(network_fn(norm_values), dtype=np.float64)
    else:
        enhanced_norm = enhance_lps(params, norm_values).astype(np.float64)
    enhanced = denormalize(LpsSequence(enhanced_norm), params.norm)
    mag_hat = magnitude_from_lps(enhanced)
    iters = params.config.gla_iters if gla_iters is None else gla_iters
    wav = griffin_lim(mag_hat, phase, GlaConfig(iters, params.stft), len(noisy))
    return wav, enhanced


# ---------------------------------------------------------------------------
# checkpoint serialization
# ---------------------------------------------------------------------------

_CONFIG_KEYS = (
    "lookahead", "prior_weight", "n_bins", "lstm_layers", "lstm_units",
    "conv_kernel", "conv_channels", "gla_iters", "frame_len", "hop", "fft_size",
)


def _config_text(params: RtsnParams) -> str:
    c, s = params.config, params.stft
    values = {
        "lookahead": c.lookahead,
        "prior_weight": repr(c.prior_weight),
        "n_bins": c.n_bins,
        "lstm_layers": c.lstm_layers,
        "lstm_units": c.lstm_units,
        "conv_kernel": c.conv_kernel,
        "conv_channels": ",".join(str(x) for x in c.conv_channels),
        "gla_iters": c.gla_iters,
        "frame_len": s.frame_len,
        "hop": s.hop,
        "fft_size": s.fft_size,
    }
    return "\n".join(f"{k}={values[k]}" for k in _CONFIG_KEYS)


def _parse_config_text(text: str) -> tuple[RtsnConfig, StftConfig]:
    fields: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"bad checkpoint config line {line!r}")
        fields[key.strip()] = value.strip()
    missing = [k for k in _CONFIG_KEYS if k not in fields]
    if missing:
        raise ValueError(f"checkpoint config missing keys {missing}")
    unknown = sorted(set(fields) - set(_CONFIG_KEYS))
    if unknown:
        raise ValueError(f"unknown checkpoint config keys {unknown}")
    config = RtsnConfig(
        lookahead=int(fields["lookahead"]),
        prior_weight=float(fields["prior_weight"]),
        n_bins=int(fields["n_bins"]),
        lstm_layers=int(fields["lstm_layers"]),
        lstm_units=int(fields["lstm_units"]),
        conv_kernel=int(fields["conv_kernel"]),
        conv_channels=tuple(int(x) for x in fields["conv_channels"].split(",")),
        gla_iters=int(fields["gla_iters"]),
    )
    stft_config = StftConfig(
        frame_len=int(fields["frame_len"]),
        hop=int(fields["hop"]),
        fft_size=int(fields["fft_size"]),
    )
    return config, stft_config


def save_checkpoint(params: RtsnParams, path) -> None:
    """Binary checkpoint: magic, version, config text, named f32 tensors."""
    if params.norm is None:
        raise ValueError("cannot save a checkpoint without normalization statistics")
    tensors = params.named_tensors() + [
        ("norm.mean", nn.Tensor(params.norm.mean.astype(np.float32))),
        ("norm.std", nn.Tensor(params.norm.std.astype(np.float32))),
    ]
    config_bytes = _config_text(params).encode("utf-8")
    chunks = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        struct.pack("<I", len(config_bytes)),
        config_bytes,
        struct.pack("<I", len(tensors)),
    ]
    for name, tensor in tensors:
        name_bytes = name.encode("utf-8")
        data = np.ascontiguousarray(tensor.data, dtype="<f4")
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes())
    from .corpus import _atomic_write

    _atomic_write(path, b"".join(chunks))


def load_checkpoint(path) -> RtsnParams:
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    pos = 0

    def take(n: int, what: str) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise ValueError(f"{path}: unexpected end of {what}")
        piece = view[pos : pos + n]
        pos += n
        return piece

    if bytes(take(8, "header")) != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", take(4, "header"))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (config_len,) = struct.unpack("<I", take(4, "header"))
    config, stft_config = _parse_config_text(
        bytes(take(config_len, "config text")).decode("utf-8")
    )
    if config.n_bins != stft_config.n_bins:
        raise ValueError(
            f"{path}: config n_bins {config.n_bins} does not match "
            f"fft_size {stft_config.fft_size}"
        )
    (count,) = struct.unpack("<I", take(4, "tensor table"))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "tensor header"))
        name = bytes(take(name_len, "tensor header")).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1, "tensor header"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "tensor header"))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = take(4 * size, "tensor data")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if pos != len(view):
        raise ValueError(f"{path}: {len(view) - pos} trailing bytes")

    expected = _expected_shapes(config)
    for extra in ("norm.mean", "norm.std"):
        expected[extra] = (config.n_bins,)
    for name, shape in expected.items():
        if name not in tensors:
            raise ValueError(f"{path}: checkpoint missing tensor {name}")
        if tensors[name].shape != shape:
            raise ValueError(
                f"{path}: tensor {name} has shape {tensors[name].shape}, "
                f"expected {shape}"
            )
    surplus = sorted(set(tensors) - set(expected))
    if surplus:
        raise ValueError(f"{path}: unexpected tensors {surplus}")

    def grab(name: str) -> nn.Tensor:
        return nn.parameter(tensors[name], name)

    lstm = [
        LstmLayerParams(
            grab(f"lstm{i}.w_in"), grab(f"lstm{i}.w_rec"), grab(f"lstm{i}.bias")
        )
        for i in range(config.lstm_layers)
    ]
    convs = [
        Conv1dParams(grab(f"conv{i}.weight"), grab(f"conv{i}.bias"))
        for i in range(len(config.conv_channels))
    ]
    norm = NormStats(tensors["norm.mean"].astype(np.float64),
                     tensors["norm.std"].astype(np.float64))
    return RtsnParams(config, stft_config, lstm, grab("proj.weight"),
                      grab("proj.bias"), convs, norm)
