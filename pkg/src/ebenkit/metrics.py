"""Objective signal metrics.  Perfect reconstructions return ``math.inf``."""

from __future__ import annotations

import math

import numpy as np

from .audio import AudioBuffer
from .errors import InvalidParamsError, LengthMismatchError, ZeroReferenceError

RESIDUAL_FLOOR = 1e-12


def _db_ratio(signal_energy: float, residual_energy: float) -> float:
    if residual_energy < RESIDUAL_FLOOR * signal_energy or residual_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(signal_energy / residual_energy)


def si_sdr(est: AudioBuffer, ref: AudioBuffer) -> float:
    """Scale-invariant signal-to-distortion ratio in dB."""
    e, r = est.samples, ref.samples
    if len(e) != len(r):
        raise LengthMismatchError(f"estimate has {len(e)} samples, reference {len(r)}")
    rr = float(np.dot(r, r))
    if rr == 0.0:
        raise ZeroReferenceError("reference has zero energy")
    alpha = float(np.dot(e, r)) / rr
    target = alpha * r
    resid = e - target
    return _db_ratio(float(np.dot(target, target)), float(np.dot(resid, resid)))


def ser(est: AudioBuffer, ref: AudioBuffer, delay: int = 0) -> float:
    """Signal-to-error ratio with ``est`` advanced by ``delay`` samples.

    The overlap ``est[delay:]`` versus ``ref[:len(est) - delay]`` is compared;
    ``est`` must be exactly ``delay`` samples longer than ``ref`` or the same
    length (the tail of ``ref`` is then dropped).
    """
    if delay < 0:
        raise InvalidParamsError("delay must be non-negative")
    e, r = est.samples, ref.samples
    if len(e) == len(r):
        e, r = e[delay:], r[: len(r) - delay]
    elif len(e) == len(r) + delay:
        e = e[delay:]
    else:
        raise LengthMismatchError(f"estimate {len(e)} and reference {len(r)} do not align with delay {delay}")
    if len(r) == 0:
        raise LengthMismatchError("nothing left to compare after delay compensation")
    rr = float(np.dot(r, r))
    if rr == 0.0:
        raise ZeroReferenceError("reference has zero energy")
    d = r - e
    return _db_ratio(rr, float(np.dot(d, d)))


def format_db(value: float):
    """JSON-friendly dB value: the infinite sentinel becomes the string "inf"."""
    return "inf" if math.isinf(value) else value
