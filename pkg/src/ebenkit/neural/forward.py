"""Deterministic forward passes of the generator and the discriminators.

All convolutions use "same" zero padding (extra pad on the right when the
total is odd), so a stride-s layer maps T frames to ceil(T / s).  Transposed
convolutions with kernel K and stride s crop (K - s) // 2 on the left and
return exactly s * T frames.  Arithmetic is float64 on float32 weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import backend
from ..audio import AudioBuffer
from ..errors import BufferTooShortError, EmptyBufferError, LengthOverflowError
from ..pqmf import PqmfBank, analyze_array, make_bank, synthesize_array
from .config import NetworkConfig, validate_config
from .graph import ConvSpec, discriminator_layers, generator_layers
from .weights import WeightStore, check_store, effective_weight

# keeps every GEMM dimension and im2col index inside int32 for all layers
MAX_INPUT_SAMPLES = 1 << 27


@dataclass(frozen=True)
class ScoreAndFeatures:
    logits: np.ndarray  # (T_final,)
    features: tuple[np.ndarray, ...]  # (F_l, T_l) for every layer but the logit one


def same_padding(length: int, kernel: int, stride: int = 1, dilation: int = 1) -> tuple[int, int]:
    out = -(-length // stride)
    total = max((out - 1) * stride + dilation * (kernel - 1) + 1 - length, 0)
    return total // 2, total - total // 2


class _Layers:
    """Effective (weight-normalized) weights of one store, computed lazily."""

    def __init__(self, store: WeightStore, specs: list[ConvSpec]):
        self.store = store
        self.specs = {s.name: s for s in specs}
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def _wb(self, name: str):
        if name not in self._cache:
            spec = self.specs[name]
            self._cache[name] = (effective_weight(self.store, spec),
                                 self.store[f"{name}.b"].astype(np.float64))
        return self._cache[name]

    def __call__(self, name: str, x: np.ndarray) -> np.ndarray:
        spec = self.specs[name]
        w, b = self._wb(name)
        if spec.transposed:
            crop = (spec.kernel - spec.stride) // 2
            return backend.conv_transpose1d(x, w, b, spec.stride, crop, x.shape[1] * spec.stride)
        left, right = same_padding(x.shape[1], spec.kernel, spec.stride, spec.dilation)
        return backend.conv1d(x, w, b, spec.stride, spec.dilation, left, right, spec.groups)


def _lrelu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.maximum(x, slope * x)


def _residual_stack(layer: _Layers, prefix: str, h: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    a = cfg.leaky_slope_gen
    for r in range(len(cfg.residual_dilations)):
        t = layer(f"{prefix}.res{r}.dil", _lrelu(h, a))
        h = h + layer(f"{prefix}.res{r}.mix", _lrelu(t, a))
    return h


def _bank(cfg: NetworkConfig) -> PqmfBank:
    return make_bank(cfg.m_bands, cfg.taps_per_band, float(cfg.atten_db))


def generator_bands(cfg: NetworkConfig, weights: WeightStore, x: AudioBuffer) -> np.ndarray:
    """Generator output before PQMF synthesis: (M, frames), values in (-1, 1)."""
    validate_config(cfg)
    check_store(cfg, weights, "gen.")
    n = len(x)
    if n == 0:
        raise EmptyBufferError("generator input is empty")
    padded = -(-n // cfg.hop) * cfg.hop
    if padded > MAX_INPUT_SAMPLES:
        raise LengthOverflowError(f"input of {n} samples exceeds the {MAX_INPUT_SAMPLES}-sample limit")
    xs = np.zeros(padded)
    xs[:n] = x.samples
    sub = analyze_array(_bank(cfg), xs)[: cfg.p_bands]

    layer = _Layers(weights, generator_layers(cfg))
    a = cfg.leaky_slope_gen
    h = layer("gen.first", sub)
    skips = [h]
    for j in range(len(cfg.encoder_strides)):
        h = layer(f"gen.enc{j}.down", _lrelu(h, a))
        h = _residual_stack(layer, f"gen.enc{j}", h, cfg)
        skips.append(h)
    for j in reversed(range(len(cfg.encoder_strides))):
        h = layer(f"gen.dec{j}.up", _lrelu(h, a)) + skips[j]
        h = _residual_stack(layer, f"gen.dec{j}", h, cfg)
    z = _lrelu(h, a)
    z[: cfg.p_bands] += sub
    return np.tanh(layer("gen.last", z))


def generator_forward(cfg: NetworkConfig, weights: WeightStore, x: AudioBuffer) -> AudioBuffer:
    """Enhance ``x``: analysis, U-Net on the P lowest bands, synthesis of M bands.

    Output has the input's length and sample rate.
    """
    bands = generator_bands(cfg, weights, x)
    y = synthesize_array(_bank(cfg), bands)
    return AudioBuffer(y[: len(x)], x.sample_rate_hz)


def average_pool(x: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping mean over ``factor`` frames; a trailing remainder is dropped."""
    if factor == 1:
        return x
    t = x.shape[1] // factor
    if t == 0:
        raise BufferTooShortError(f"{x.shape[1]} frames cannot be pooled by {factor}")
    return x[:, : t * factor].reshape(x.shape[0], t, factor).mean(axis=2)


def _run_stack(layer: _Layers, specs: list[ConvSpec], h: np.ndarray, slope: float) -> ScoreAndFeatures:
    feats = []
    for spec in specs[:-1]:
        h = _lrelu(layer(spec.name, h), slope)
        feats.append(h)
    logits = layer(specs[-1].name, h)[0]
    return ScoreAndFeatures(logits, tuple(feats))


def discriminator_forward(cfg: NetworkConfig, weights: WeightStore, signal: AudioBuffer
                          ) -> list[ScoreAndFeatures]:
    """Scores and intermediate maps of every discriminator scale.

    Scale 0 sees the waveform.  Scale k >= 1 sees the Q upper PQMF bands
    (same bank as the generator), average-pooled by 2**(k-1) in time.
    """
    validate_config(cfg)
    check_store(cfg, weights, "disc")
    if len(signal) == 0:
        raise EmptyBufferError("discriminator input is empty")
    if len(signal) > MAX_INPUT_SAMPLES:
        raise LengthOverflowError(f"input of {len(signal)} samples exceeds the limit")
    scales = discriminator_layers(cfg)
    layer = _Layers(weights, [s for scale in scales for s in scale])
    slope = cfg.leaky_slope_disc
    out = [_run_stack(layer, scales[0], signal.samples[None, :], slope)]
    if len(scales) > 1:
        m = cfg.m_bands
        xs = np.zeros(-(-len(signal) // m) * m)
        xs[: len(signal)] = signal.samples
        upper = analyze_array(_bank(cfg), xs)[m - cfg.q_bands:]
        for k in range(1, len(scales)):
            out.append(_run_stack(layer, scales[k], average_pool(upper, 2 ** (k - 1)), slope))
    return out


def largest_activation(cfg: NetworkConfig, n_samples: int) -> int:
    """Element count of the widest generator activation for an input length."""
    frames = -(-n_samples // cfg.hop) * cfg.hop // cfg.m_bands
    best = max(cfg.p_bands, cfg.m_bands) * frames
    for spec in generator_layers(cfg):
        if spec.transposed:
            frames *= spec.stride
        else:
            frames = -(-frames // spec.stride)
        best = max(best, spec.c_out * frames)
    return best


def output_gain_bound(cfg: NetworkConfig) -> float:
    """Worst-case |output| when every band value is bounded by 1 (l1 gain of synthesis)."""
    bank = _bank(cfg)
    m = bank.bands
    # each output sample sums at most ceil(N / M) taps per band
    g = np.abs(bank.synthesis_kernels)
    per_phase = max(float(np.sum(g[:, p::m])) for p in range(m))
    return math.sqrt(m) * per_phase
