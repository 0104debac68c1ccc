"""Pseudo-QMF filter banks.

A Kaiser-windowed ideal lowpass prototype is designed with a single free
parameter (its cutoff), cosine-modulated into M analysis/synthesis kernels,
and applied as strided convolution (analysis) and strided transposed
convolution (synthesis).

Conventions:

* The prototype is energy-normalized, ``sum(h**2) == 1 / (2M)``, which makes
  the bank's distortion function average exactly one.  Its DC gain stays
  within a few hundredths of a dB of unity.
* Analysis and synthesis each apply a gain of ``sqrt(M)``.  Synthesis is then
  the adjoint of analysis and the subband tensor carries the input's energy.
* Analysis left-pads ``N - 1`` zeros, so analysis followed by synthesis
  delays the signal by exactly ``N - 1`` samples.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal.windows import kaiser

from . import backend
from .audio import AudioBuffer
from .errors import (
    BankMismatchError,
    CountOutOfRangeError,
    InvalidParamsError,
    NoConvergenceError,
)

DEFAULT_TAPS_PER_BAND = 8
DEFAULT_ATTEN_DB = 72.0
MAX_BISECTION_ITERS = 200
CRITERION_TOL = 1e-9


def kaiser_beta(atten_db: float) -> float:
    """Kaiser's empirical shape parameter for a stopband attenuation in dB."""
    if atten_db > 50:
        return 0.1102 * (atten_db - 8.7)
    if atten_db >= 21:
        return 0.5842 * (atten_db - 21) ** 0.4 + 0.07886 * (atten_db - 21)
    return 0.0


def dtft(taps: np.ndarray, omega) -> np.ndarray:
    """Complex frequency response of an FIR at angular frequencies ``omega``."""
    omega = np.atleast_1d(np.asarray(omega, dtype=np.float64))
    n = np.arange(len(taps))
    return np.exp(-1j * np.outer(omega, n)) @ taps


@dataclass(frozen=True)
class PrototypeFilter:
    taps: np.ndarray
    bands: int
    taps_per_band: int
    cutoff_normalized: float  # cutoff / pi
    atten_db: float
    beta: float
    criterion_residual: float
    iterations: int

    @property
    def length(self) -> int:
        return len(self.taps)


def _windowed_lowpass(length: int, cutoff: float, window: np.ndarray, bands: int) -> np.ndarray:
    n = np.arange(length) - (length - 1) / 2.0
    h = cutoff / np.pi * np.sinc(cutoff * n / np.pi) * window
    h = 0.5 * (h + h[::-1])
    return h / np.sqrt(2 * bands * np.sum(h * h))


def design_prototype(
    bands: int,
    taps_per_band: int = DEFAULT_TAPS_PER_BAND,
    atten_db: float = DEFAULT_ATTEN_DB,
) -> PrototypeFilter:
    """Design the prototype by bisection on its cutoff.

    The cutoff in (0, pi/M) is chosen so that ``|H(pi/(2M))|**2 == 1/2``
    within 1e-9, i.e. the prototype is power complementary at the crossover
    between adjacent bands.
    """
    if int(bands) != bands or bands < 2:
        raise InvalidParamsError(f"bands must be an integer >= 2, got {bands}")
    if int(taps_per_band) != taps_per_band or taps_per_band < 4:
        raise InvalidParamsError(f"taps_per_band must be an integer >= 4, got {taps_per_band}")
    if not atten_db >= 40:
        raise InvalidParamsError(f"atten_db must be >= 40, got {atten_db}")
    bands, taps_per_band = int(bands), int(taps_per_band)
    length = bands * taps_per_band
    beta = kaiser_beta(atten_db)
    window = kaiser(length, beta)
    crossover = np.pi / (2 * bands)

    def criterion(cutoff: float) -> tuple[float, np.ndarray]:
        h = _windowed_lowpass(length, cutoff, window, bands)
        return float(np.abs(dtft(h, crossover)[0]) ** 2 - 0.5), h

    lo, hi = 0.0, np.pi / bands
    f_lo, _ = criterion(1e-9 * hi)
    f_hi, _ = criterion(hi)
    if not (f_lo < 0.0 < f_hi):
        raise NoConvergenceError(
            f"crossover criterion not bracketed on (0, pi/M) for M={bands}, N={length}, atten={atten_db}"
        )
    for it in range(1, MAX_BISECTION_ITERS + 1):
        mid = 0.5 * (lo + hi)
        res, h = criterion(mid)
        if abs(res) <= CRITERION_TOL:
            break
        if res < 0.0:
            lo = mid
        else:
            hi = mid
    else:
        raise NoConvergenceError(f"bisection did not converge in {MAX_BISECTION_ITERS} iterations")
    h.flags.writeable = False
    return PrototypeFilter(
        taps=h,
        bands=bands,
        taps_per_band=taps_per_band,
        cutoff_normalized=float(mid / np.pi),
        atten_db=float(atten_db),
        beta=beta,
        criterion_residual=res,
        iterations=it,
    )


@dataclass(frozen=True)
class PqmfBank:
    analysis_kernels: np.ndarray  # (M, N), rows h_i
    synthesis_kernels: np.ndarray  # (M, N), rows g_i
    bands: int
    prototype: PrototypeFilter

    @property
    def length(self) -> int:
        return self.analysis_kernels.shape[1]

    @property
    def delay(self) -> int:
        """Samples of delay through analysis followed by synthesis."""
        return self.length - 1


def modulate_bank(proto: PrototypeFilter) -> PqmfBank:
    h, m = proto.taps, proto.bands
    n = np.arange(len(h)) - (len(h) - 1) / 2.0
    i = np.arange(m)[:, None]
    arg = (2 * i + 1) * (np.pi / (2 * m)) * n[None, :]
    phase = ((-1.0) ** i) * (np.pi / 4)
    hk = 2.0 * h * np.cos(arg + phase)
    gk = 2.0 * h * np.cos(arg - phase)
    hk.flags.writeable = False
    gk.flags.writeable = False
    return PqmfBank(hk, gk, m, proto)


@functools.lru_cache(maxsize=32)
def make_bank(bands: int, taps_per_band: int = DEFAULT_TAPS_PER_BAND,
              atten_db: float = DEFAULT_ATTEN_DB) -> PqmfBank:
    return modulate_bank(design_prototype(bands, taps_per_band, atten_db))


@dataclass(frozen=True)
class SubbandTensor:
    data: np.ndarray  # (M, frames)
    bands: int
    source_rate_hz: int
    source_length: int  # input length before padding to a multiple of M
    band_indices: tuple[int, ...] = ()

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] != len(self.band_indices or range(self.bands)):
            raise ValueError("subband data shape does not match its band list")
        if not self.band_indices:
            object.__setattr__(self, "band_indices", tuple(range(self.bands)))

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def pad(self) -> int:
        return self.frames * self.bands - self.source_length


def analyze_array(bank: PqmfBank, x: np.ndarray) -> np.ndarray:
    """Analysis on a raw array whose length is a multiple of M; returns (M, len/M)."""
    m, n = bank.bands, bank.length
    # cross-correlation with reversed h_i (== g_i) is convolution with h_i
    w = np.ascontiguousarray(bank.synthesis_kernels[:, None, :])
    y = backend.conv1d(x[None, :], w, None, stride=m, pad_left=n - 1, pad_right=0)
    return y * math.sqrt(m)


def synthesize_array(bank: PqmfBank, sub: np.ndarray) -> np.ndarray:
    m = bank.bands
    w = np.ascontiguousarray(bank.synthesis_kernels[None, :, :])
    y = backend.conv_transpose1d(sub, w, None, stride=m, crop_left=0, out_len=m * sub.shape[1])
    return y[0] * math.sqrt(m)


def analyze(bank: PqmfBank, buf: AudioBuffer) -> SubbandTensor:
    """Decompose ``buf`` into M decimated bands (zero-padding to a multiple of M)."""
    m = bank.bands
    x = buf.samples
    if len(x) == 0:
        raise InvalidParamsError("cannot analyze an empty buffer")
    padded = -(-len(x) // m) * m
    if padded != len(x):
        x = np.concatenate([x, np.zeros(padded - len(x))])
    return SubbandTensor(analyze_array(bank, x), m, buf.sample_rate_hz, len(buf))


def synthesize(bank: PqmfBank, sub: SubbandTensor) -> AudioBuffer:
    """Recombine all M bands; output is trimmed to the analyzed input length."""
    if sub.bands != bank.bands or sub.data.shape[0] != bank.bands:
        raise BankMismatchError(
            f"tensor has {sub.data.shape[0]} of {sub.bands} bands, bank has {bank.bands}"
        )
    y = synthesize_array(bank, sub.data)
    return AudioBuffer(y[: sub.source_length], sub.source_rate_hz)


def select_bands(sub: SubbandTensor, mode: str, count: int) -> SubbandTensor:
    """Keep the lowest ``count`` bands (``lowest_p``) or the highest (``upper_q``)."""
    m = sub.data.shape[0]
    if not 1 <= count <= m:
        raise CountOutOfRangeError(f"count must lie in [1, {m}], got {count}")
    if mode == "lowest_p":
        sl = slice(0, count)
    elif mode == "upper_q":
        sl = slice(m - count, m)
    else:
        raise InvalidParamsError(f"unknown mode {mode!r}")
    return SubbandTensor(sub.data[sl], sub.bands, sub.source_rate_hz, sub.source_length,
                         sub.band_indices[sl])


def achieved_attenuation_db(proto: PrototypeFilter, grid: int = 8192) -> float:
    """Worst stopband level relative to DC over [pi/M, pi], as a positive dB figure."""
    w = np.linspace(np.pi / proto.bands, np.pi, grid)
    mag = np.abs(dtft(proto.taps, w))
    dc = abs(dtft(proto.taps, 0.0)[0])
    return float(-20 * np.log10(np.max(mag) / dc))


def design_report(bank: PqmfBank) -> str:
    """Plain-text design summary with taps as decimal literals."""
    p = bank.prototype
    lines = [
        "# PQMF prototype design",
        f"bands = {p.bands}",
        f"taps_per_band = {p.taps_per_band}",
        f"length = {p.length}",
        f"atten_db_requested = {p.atten_db!r}",
        f"kaiser_beta = {float(p.beta)!r}",
        f"cutoff_over_pi = {p.cutoff_normalized!r}",
        f"criterion_residual = {p.criterion_residual!r}",
        f"bisection_iterations = {p.iterations}",
        f"dc_gain_db = {float(20 * np.log10(abs(dtft(p.taps, 0.0)[0])))!r}",
        f"achieved_stopband_atten_db = {achieved_attenuation_db(p)!r}",
        f"delay_samples = {bank.delay}",
        "# taps",
    ]
    lines += [repr(float(t)) for t in p.taps]
    return "\n".join(lines) + "\n"
