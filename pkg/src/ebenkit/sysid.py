"""Transfer-function and coherence estimation from paired recordings.

``y`` is the reference (airborne) signal and ``x`` the body-conducted one,
related by ``x = psi * y``.  The transfer function is estimated per analysis
horizon as ``P_yx / P_yy`` (Welch averages over Hann frames), and the
per-horizon magnitudes are aggregated by median and 10th/90th percentiles.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio import AudioBuffer
from .errors import (
    BufferTooShortError,
    EmptyBufferError,
    InvalidParamsError,
    LengthMismatchError,
    SegmentOutOfRangeError,
    TooFewSegmentsError,
)

DEFAULT_VAD_THRESHOLD_DB = 30.0
DEFAULT_VAD_FRAME = 512
SMOOTHING_BINS = 5
MIN_HORIZONS = 3
MIN_COHERENCE_FRAMES = 8
_MAG_FLOOR = 1e-15


@dataclass(frozen=True)
class WelchConfig:
    fft_size: int = 512
    segment_overlap: float = 0.5
    horizon_samples: int = 16384
    horizon_overlap: float = 0.5
    window: str = "hann"

    def __post_init__(self):
        n = self.fft_size
        if n < 2 or n & (n - 1):
            raise InvalidParamsError(f"fft_size must be a power of two, got {n}")
        if not 0.0 <= self.segment_overlap < 1.0 or not 0.0 <= self.horizon_overlap < 1.0:
            raise InvalidParamsError("overlaps must lie in [0, 1)")
        if self.horizon_samples < 2 * n:
            raise InvalidParamsError("horizon must span at least two FFT frames")
        if self.window != "hann":
            raise InvalidParamsError(f"only the hann window is supported, got {self.window!r}")

    @property
    def hop(self) -> int:
        return max(1, int(round(self.fft_size * (1.0 - self.segment_overlap))))

    @property
    def horizon_hop(self) -> int:
        return max(1, int(round(self.horizon_samples * (1.0 - self.horizon_overlap))))

    def frequencies(self, fs_hz: float) -> np.ndarray:
        return np.fft.rfftfreq(self.fft_size, 1.0 / fs_hz)

    def horizon_count(self, n_samples: int) -> int:
        if n_samples < self.horizon_samples:
            return 0
        return (n_samples - self.horizon_samples) // self.horizon_hop + 1


class SpectralDensities(NamedTuple):
    p_yx: np.ndarray
    p_yy: np.ndarray
    p_xx: np.ndarray
    n_frames: int


def _window(n: int) -> np.ndarray:
    # periodic Hann
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _densities(x: np.ndarray, y: np.ndarray, cfg: WelchConfig, fs_hz: float) -> SpectralDensities:
    n = cfg.fft_size
    if len(x) < n:
        raise BufferTooShortError(f"need at least {n} samples, got {len(x)}")
    w = _window(n)
    fx = np.fft.rfft(sliding_window_view(x, n)[:: cfg.hop] * w, axis=1)
    fy = np.fft.rfft(sliding_window_view(y, n)[:: cfg.hop] * w, axis=1)
    scale = np.full(n // 2 + 1, 2.0 / (fs_hz * np.sum(w * w)))
    scale[0] /= 2.0
    if n % 2 == 0:
        scale[-1] /= 2.0
    # conj(Y) X written out so that x == y gives bit-identical, real densities
    re = np.mean(fy.real * fx.real + fy.imag * fx.imag, axis=0) * scale
    im = np.mean(fy.real * fx.imag - fy.imag * fx.real, axis=0) * scale
    p_yx = re + 1j * im
    p_yy = np.mean(fy.real * fy.real + fy.imag * fy.imag, axis=0) * scale
    p_xx = np.mean(fx.real * fx.real + fx.imag * fx.imag, axis=0) * scale
    return SpectralDensities(p_yx, p_yy, p_xx, fx.shape[0])


def _pair(x: AudioBuffer, y: AudioBuffer) -> tuple[np.ndarray, np.ndarray, int]:
    if len(x) != len(y):
        raise LengthMismatchError(f"x has {len(x)} samples, y has {len(y)}")
    if x.sample_rate_hz != y.sample_rate_hz:
        raise LengthMismatchError("x and y sample rates differ")
    return x.samples, y.samples, x.sample_rate_hz


def welch_densities(x: AudioBuffer, y: AudioBuffer, cfg: WelchConfig, segment_index: int) -> SpectralDensities:
    """Welch cross/auto densities over horizon ``segment_index``.

    ``p_yx`` is the average of ``conj(Y) * X``, so ``p_yx / p_yy`` estimates
    the filter taking ``y`` to ``x``.
    """
    xs, ys, fs = _pair(x, y)
    count = cfg.horizon_count(len(xs))
    if not 0 <= segment_index < count:
        raise SegmentOutOfRangeError(f"segment {segment_index} outside [0, {count})")
    start = segment_index * cfg.horizon_hop
    sl = slice(start, start + cfg.horizon_samples)
    return _densities(xs[sl], ys[sl], cfg, fs)


def vad_mask(ref: AudioBuffer, threshold_db_below_peak: float = DEFAULT_VAD_THRESHOLD_DB,
             frame: int = DEFAULT_VAD_FRAME) -> np.ndarray:
    """Frame-level activity: RMS within ``threshold`` dB of the loudest frame.

    The last frame may be partial; its RMS uses the samples it has.
    """
    if frame <= 0:
        raise InvalidParamsError("frame must be positive")
    s = ref.samples
    if len(s) == 0:
        raise EmptyBufferError("VAD on an empty buffer")
    n_frames = -(-len(s) // frame)
    if threshold_db_below_peak == np.inf:
        return np.ones(n_frames, dtype=bool)
    padded = np.zeros(n_frames * frame)
    padded[: len(s)] = s
    energy = np.sum(padded.reshape(n_frames, frame) ** 2, axis=1)
    counts = np.full(n_frames, frame)
    counts[-1] = len(s) - (n_frames - 1) * frame
    with np.errstate(divide="ignore"):
        rms_db = 10.0 * np.log10(energy / counts)
    return rms_db >= np.max(rms_db) - threshold_db_below_peak


def select_active(samples: np.ndarray, mask: np.ndarray, frame: int) -> np.ndarray:
    """Concatenate the frames flagged in ``mask``."""
    n_frames = -(-len(samples) // frame)
    if len(mask) != n_frames:
        raise LengthMismatchError(f"mask has {len(mask)} frames, signal has {n_frames}")
    parts = [samples[i * frame:(i + 1) * frame] for i in np.flatnonzero(mask)]
    return np.concatenate(parts) if parts else np.zeros(0)


@dataclass(frozen=True)
class TransferFunctionEstimate:
    freq_grid_hz: np.ndarray
    median_db: np.ndarray
    smoothed_db: np.ndarray
    p10_db: np.ndarray
    p90_db: np.ndarray
    n_segments: int


@dataclass(frozen=True)
class CoherenceCurve:
    freq_grid_hz: np.ndarray
    coherence: np.ndarray
    n_frames: int


def moving_average(v: np.ndarray, width: int = SMOOTHING_BINS) -> np.ndarray:
    """Centered moving average; the window shrinks at the edges."""
    half = width // 2
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(len(v))
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, len(v))
    return (c[hi] - c[lo]) / (hi - lo)


def estimate_transfer(y: AudioBuffer, x: AudioBuffer, cfg: WelchConfig | None = None,
                      vad: np.ndarray | None = None, vad_frame: int = DEFAULT_VAD_FRAME
                      ) -> TransferFunctionEstimate:
    """Robust magnitude estimate of the filter taking ``y`` to ``x``.

    Active VAD frames (computed on ``y`` when ``vad`` is None) are
    concatenated, cut into overlapping horizons, and each horizon yields one
    ``|P_yx / P_yy|`` curve.
    """
    cfg = cfg or WelchConfig()
    xs, ys, fs = _pair(x, y)
    if vad is None:
        vad = vad_mask(y, DEFAULT_VAD_THRESHOLD_DB, vad_frame)
    ya = select_active(ys, vad, vad_frame)
    xa = select_active(xs, vad, vad_frame)
    count = cfg.horizon_count(len(ya))
    if count < MIN_HORIZONS:
        raise TooFewSegmentsError(f"{count} active horizons, need at least {MIN_HORIZONS}")
    ya_buf, xa_buf = AudioBuffer(ya, fs), AudioBuffer(xa, fs)
    curves = np.empty((count, cfg.fft_size // 2 + 1))
    for i in range(count):
        d = welch_densities(xa_buf, ya_buf, cfg, i)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d.p_yy > 0, np.abs(d.p_yx) / d.p_yy, 0.0)
        curves[i] = 20.0 * np.log10(np.maximum(ratio, _MAG_FLOOR))
    p10, med, p90 = np.percentile(curves, [10, 50, 90], axis=0)
    return TransferFunctionEstimate(
        freq_grid_hz=cfg.frequencies(fs),
        median_db=med,
        smoothed_db=moving_average(med),
        p10_db=p10,
        p90_db=p90,
        n_segments=count,
    )


def coherence(y: AudioBuffer, x: AudioBuffer, cfg: WelchConfig | None = None) -> CoherenceCurve:
    """Magnitude-squared coherence averaged over every frame of the recording."""
    cfg = cfg or WelchConfig()
    xs, ys, fs = _pair(x, y)
    need = cfg.fft_size + (MIN_COHERENCE_FRAMES - 1) * cfg.hop
    if len(xs) < need:
        raise BufferTooShortError(f"coherence needs {need} samples for {MIN_COHERENCE_FRAMES} frames")
    d = _densities(xs, ys, cfg, fs)
    denom = d.p_xx * d.p_yy
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(denom > 0, np.abs(d.p_yx) ** 2 / denom, 0.0)
    return CoherenceCurve(cfg.frequencies(fs), np.clip(c, 0.0, 1.0), d.n_frames)


CSV_COLUMNS = ("freq_hz", "median_db", "smoothed_db", "p10_db", "p90_db", "coherence")


def write_csv(path, est: TransferFunctionEstimate, coh: CoherenceCurve | None = None) -> None:
    c = coh.coherence if coh is not None else np.full(len(est.freq_grid_hz), np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in zip(est.freq_grid_hz, est.median_db, est.smoothed_db, est.p10_db, est.p90_db, c):
            w.writerow([repr(float(v)) for v in row])
