"""Synthetic in-ear degradation of clean speech.

Two pipelines, both followed by white Gaussian noise 23 dB below the
filtered signal:

``fixed``
    600 Hz, Q=1 second-order lowpass applied forward and backward.
``random``
    A linear-phase FIR whose magnitude is drawn log-uniformly between two
    per-frequency bounds and faded out above 3 kHz with a Hann ramp.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.signal import oaconvolve
from scipy.signal.windows import kaiser

from . import backend
from .audio import AudioBuffer, read_wav, write_wav
from .errors import (
    AllZeroSignalError,
    BufferTooShortError,
    EbenError,
    InvalidParamsError,
    InvalidSpecError,
)
from .rng import SplitMix64, derive_seed, mix64

FIXED_CUTOFF_HZ = 600.0
FIXED_Q = 1.0
NOISE_REL_DB = -23.0
APODIZE_START_HZ = 3000.0
FLOOR_DB = -80.0
DEFAULT_FIR_LENGTH = 512
# sidelobes well under the -80 dB floor; mainlobe about 170 Hz wide at 512 taps
FIR_WINDOW_BETA = 8.0


@dataclass(frozen=True)
class BiquadCoeffs:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float
    fc_hz: float
    q_factor: float
    fs_hz: float

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2])

    @property
    def a(self) -> np.ndarray:
        return np.array([1.0, self.a1, self.a2])

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response at ``freqs_hz``."""
        z = np.exp(-1j * 2 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.fs_hz)
        return (self.b0 + self.b1 * z + self.b2 * z * z) / (1.0 + self.a1 * z + self.a2 * z * z)

    def poles(self) -> np.ndarray:
        return np.roots(self.a)


def design_biquad_lowpass(fc_hz: float, q: float, fs_hz: float) -> BiquadCoeffs:
    """Bilinear-transform lowpass, prewarped so the analog cutoff maps to ``fc_hz``."""
    if not (0.0 < fc_hz < fs_hz / 2.0) or not q > 0.0:
        raise InvalidParamsError(f"need 0 < fc < fs/2 and q > 0, got fc={fc_hz}, q={q}, fs={fs_hz}")
    w0 = 2.0 * math.pi * fc_hz / fs_hz
    cw, alpha = math.cos(w0), math.sin(w0) / (2.0 * q)
    a0 = 1.0 + alpha
    b0 = (1.0 - cw) / 2.0 / a0
    return BiquadCoeffs(
        b0=b0,
        b1=(1.0 - cw) / a0,
        b2=b0,
        a1=-2.0 * cw / a0,
        a2=(1.0 - alpha) / a0,
        fc_hz=float(fc_hz),
        q_factor=float(q),
        fs_hz=float(fs_hz),
    )


def _steady_state(c: BiquadCoeffs) -> np.ndarray:
    # DF2T state reached after a long run of unit input
    gain = (c.b0 + c.b1 + c.b2) / (1.0 + c.a1 + c.a2)
    z2 = c.b2 - c.a2 * gain
    z1 = c.b1 - c.a1 * gain + z2
    return np.array([z1, z2])


def filtfilt(coeffs: BiquadCoeffs, buf: AudioBuffer) -> AudioBuffer:
    """Zero-phase forward-backward filtering.

    The signal is extended at both ends by odd reflection of
    ``3 * max(len(b), len(a))`` samples and each pass starts from the
    steady state matching its first sample.
    """
    x = buf.samples
    padlen = 3 * 3
    if len(x) <= max(padlen, 6 * 2):
        raise BufferTooShortError(f"filtfilt needs more than {max(padlen, 12)} samples, got {len(x)}")
    ext = np.concatenate([
        2.0 * x[0] - x[padlen:0:-1],
        x,
        2.0 * x[-1] - x[-2:-padlen - 2:-1],
    ])
    zi = _steady_state(coeffs)
    b, a = coeffs.b, coeffs.a
    y = backend.biquad_filter(b, a, ext, zi * ext[0])
    y = backend.biquad_filter(b, a, y[::-1], zi * y[-1])[::-1]
    return buf.with_samples(y[padlen:-padlen])


def _noise(x: np.ndarray, rel_db: float, seed: int) -> np.ndarray:
    power = float(np.mean(x * x))
    if power == 0.0:
        raise AllZeroSignalError("noise level is relative to signal power, which is zero")
    scale = math.sqrt(power * 10.0 ** (rel_db / 10.0))
    return scale * SplitMix64(seed).normal(len(x))


def add_relative_noise(buf: AudioBuffer, rel_db: float, seed: int) -> AudioBuffer:
    """Add white Gaussian noise ``rel_db`` below the signal's average power.

    ``rel_db = -inf`` disables the noise and returns ``buf`` unchanged.
    """
    if rel_db == -math.inf:
        return buf
    return buf.with_samples(buf.samples + _noise(buf.samples, rel_db, seed))


def noise_level_db(noise: np.ndarray, signal: np.ndarray) -> float:
    return float(10.0 * np.log10(np.mean(noise * noise) / np.mean(signal * signal)))


@dataclass(frozen=True)
class DegradationReport:
    measured_noise_rel_db: float
    clip_count: int
    pipeline: str
    seed: int


def _require_16k(buf: AudioBuffer) -> None:
    if buf.sample_rate_hz != 16000:
        raise InvalidParamsError(f"expected 16 kHz input, got {buf.sample_rate_hz} Hz")


def _finish(filtered: np.ndarray, seed: int, pipeline: str, rel_db: float):
    if rel_db == -math.inf:
        out, measured = filtered, -math.inf
    else:
        noise = _noise(filtered, rel_db, seed)
        out, measured = filtered + noise, noise_level_db(noise, filtered)
    report = DegradationReport(
        measured_noise_rel_db=measured,
        clip_count=int(np.count_nonzero(np.abs(out) > 1.0)),
        pipeline=pipeline,
        seed=seed,
    )
    return out, report


def apply_psi_fixed(buf: AudioBuffer, seed: int, rel_db: float = NOISE_REL_DB):
    _require_16k(buf)
    if not np.any(buf.samples):
        raise AllZeroSignalError("silent input: noise calibration undefined")
    coeffs = design_biquad_lowpass(FIXED_CUTOFF_HZ, FIXED_Q, buf.sample_rate_hz)
    filtered = filtfilt(coeffs, buf).samples
    out, report = _finish(filtered, seed, "fixed", rel_db)
    return buf.with_samples(out), report


@dataclass(frozen=True)
class RandomResponseSpec:
    freq_grid_hz: np.ndarray
    lower_db: np.ndarray
    upper_db: np.ndarray
    seed: int
    apodize_start_hz: float = APODIZE_START_HZ
    fir_length: int = DEFAULT_FIR_LENGTH
    fs_hz: float = 16000.0
    floor_db: float = FLOOR_DB

    def validate(self) -> None:
        f, lo, hi = (np.asarray(v, dtype=np.float64) for v in (self.freq_grid_hz, self.lower_db, self.upper_db))
        if f.ndim != 1 or len(f) < 2 or lo.shape != f.shape or hi.shape != f.shape:
            raise InvalidSpecError("grid and bounds must be 1-D arrays of equal length >= 2")
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise InvalidSpecError("grid and bounds must be finite")
        if np.any(np.diff(f) <= 0):
            raise InvalidSpecError("frequency grid must be strictly ascending")
        if f[0] < 0 or f[-1] < self.fs_hz / 2.0:
            raise InvalidSpecError("frequency grid must cover (0, fs/2]")
        if np.any(lo > hi):
            raise InvalidSpecError("lower bound exceeds upper bound")
        if self.fir_length < 16:
            raise InvalidSpecError("fir_length must be at least 16")
        if not 0 < self.apodize_start_hz < self.fs_hz / 2.0:
            raise InvalidSpecError("apodization must start inside (0, fs/2)")


def hann_fade(freqs_hz: np.ndarray, start_hz: float, stop_hz: float) -> np.ndarray:
    """1 below ``start_hz``, raised-cosine fall to 0 at ``stop_hz``."""
    u = np.clip((np.asarray(freqs_hz) - start_hz) / (stop_hz - start_hz), 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * u))


def draw_random_response(spec: RandomResponseSpec) -> np.ndarray:
    """Per-grid-point magnitude in dB: uniform in dB (log-uniform in gain), faded, floored."""
    spec.validate()
    f = np.asarray(spec.freq_grid_hz, dtype=np.float64)
    lo = np.asarray(spec.lower_db, dtype=np.float64)
    hi = np.asarray(spec.upper_db, dtype=np.float64)
    u = SplitMix64(spec.seed).uniform(len(f))
    mag = 10.0 ** ((lo + u * (hi - lo)) / 20.0)
    mag = mag * hann_fade(f, spec.apodize_start_hz, spec.fs_hz / 2.0)
    return 20.0 * np.log10(np.maximum(mag, 10.0 ** (spec.floor_db / 20.0)))


def fir_from_magnitude(freq_hz, mag_db, length: int, fs_hz: float) -> np.ndarray:
    """Linear-phase FIR by frequency sampling on a dense grid and Kaiser truncation."""
    nfft = max(8192, 1 << int(math.ceil(math.log2(8 * length))))
    grid = np.arange(nfft // 2 + 1) * fs_hz / nfft
    amp = 10.0 ** (np.interp(grid, freq_hz, mag_db) / 20.0)
    delay = (length - 1) / 2.0
    spectrum = amp * np.exp(-2j * np.pi * grid / fs_hz * delay)
    h = np.fft.irfft(spectrum, nfft)[:length] * kaiser(length, FIR_WINDOW_BETA)
    return 0.5 * (h + h[::-1])


def sample_psi_random(spec: RandomResponseSpec) -> np.ndarray:
    mag_db = draw_random_response(spec)
    return fir_from_magnitude(spec.freq_grid_hz, mag_db, spec.fir_length, spec.fs_hz)


def apply_fir_aligned(taps: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Filter and remove the integer part of the linear-phase delay."""
    shift = (len(taps) - 1) // 2
    return oaconvolve(x, taps)[shift:shift + len(x)]


def apply_psi_random(buf: AudioBuffer, bounds, seed: int, rel_db: float = NOISE_REL_DB,
                     fir_length: int = DEFAULT_FIR_LENGTH):
    """``bounds`` is ``(freq_hz, lower_db, upper_db)``; ``seed`` drives both draw and noise."""
    _require_16k(buf)
    if not np.any(buf.samples):
        raise AllZeroSignalError("silent input: noise calibration undefined")
    freq, lo, hi = bounds
    spec = RandomResponseSpec(np.asarray(freq), np.asarray(lo), np.asarray(hi), seed=seed,
                              fir_length=fir_length, fs_hz=float(buf.sample_rate_hz))
    filtered = apply_fir_aligned(sample_psi_random(spec), buf.samples)
    out, report = _finish(filtered, mix64(seed ^ 0x6E6F697365), "random", rel_db)
    report = DegradationReport(report.measured_noise_rel_db, report.clip_count, "random", seed)
    return buf.with_samples(out), report


def load_bounds_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read ``freq_hz`` plus either ``lower_db``/``upper_db`` or ``p10_db``/``p90_db`` columns.

    The second form is what ``sysid`` exports, so a measured device can be
    fed straight back into the random pipeline.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InvalidSpecError(f"{path}: no rows")
    cols = rows[0].keys()
    if {"lower_db", "upper_db"} <= cols:
        lo_key, hi_key = "lower_db", "upper_db"
    elif {"p10_db", "p90_db"} <= cols:
        lo_key, hi_key = "p10_db", "p90_db"
    else:
        raise InvalidSpecError(f"{path}: need lower_db/upper_db or p10_db/p90_db columns")
    try:
        f = np.array([float(r["freq_hz"]) for r in rows])
        lo = np.array([float(r[lo_key]) for r in rows])
        hi = np.array([float(r[hi_key]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise InvalidSpecError(f"{path}: {exc}") from exc
    return f, lo, hi


def default_bounds() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Placeholder in-ear envelope shipped with the package (not measured data)."""
    with resources.as_file(resources.files("ebenkit") / "data" / "default_bounds.csv") as p:
        return load_bounds_csv(p)


@dataclass
class CorpusReport:
    pipeline: str
    master_seed: int
    files: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _degrade_one(src: Path, dst: Path, rel: str, pipeline: str, master_seed: int, bounds,
                 encoding: str) -> dict:
    seed = derive_seed(master_seed, rel)
    buf = read_wav(src)
    if pipeline == "fixed":
        out, rep = apply_psi_fixed(buf, seed)
    else:
        out, rep = apply_psi_random(buf, bounds, seed)
    dst.parent.mkdir(parents=True, exist_ok=True)
    write_wav(dst, out, encoding)
    return {"path": rel, "seed": seed, "rel_db": rep.measured_noise_rel_db, "clip_count": rep.clip_count}


def batch_degrade(in_dir, out_dir, pipeline: str, master_seed: int, bounds=None,
                  workers: int = 1, encoding: str = "float32") -> CorpusReport:
    """Degrade every ``*.wav`` under ``in_dir`` into the same layout under ``out_dir``.

    Per-file seeds depend only on the master seed and the relative path, so
    output does not depend on processing order.  Failures are recorded and
    the batch continues.
    """
    if pipeline not in ("fixed", "random"):
        raise InvalidParamsError(f"pipeline must be fixed or random, got {pipeline!r}")
    if pipeline == "random" and bounds is None:
        bounds = default_bounds()
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    sources = sorted(p for p in in_dir.rglob("*") if p.suffix.lower() == ".wav" and p.is_file())
    report = CorpusReport(pipeline, master_seed)

    def job(src: Path):
        rel = src.relative_to(in_dir).as_posix()
        try:
            return _degrade_one(src, out_dir / rel, rel, pipeline, master_seed, bounds, encoding)
        except (EbenError, OSError, ValueError) as exc:
            return {"path": rel, "error": f"{type(exc).__name__}: {exc}"}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, sources))
    else:
        results = [job(s) for s in sources]
    for r in results:
        (report.errors if "error" in r else report.files).append(r)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "degrade_report.json").write_text(report.to_json())
    return report
