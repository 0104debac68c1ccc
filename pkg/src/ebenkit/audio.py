"""Mono WAV reading/writing and the in-memory signal container."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AllZeroSignalError,
    EmptyBufferError,
    IoFailureError,
    MalformedHeaderError,
    NotMonoError,
    UnsupportedEncodingError,
)

WAVE_FORMAT_PCM = 1
WAVE_FORMAT_IEEE_FLOAT = 3
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioBuffer:
    """Mono samples (float64) tagged with their sample rate."""

    samples: np.ndarray
    sample_rate_hz: int = 16000

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("AudioBuffer holds a 1-D mono signal")
        if not np.all(np.isfinite(s)):
            raise ValueError("AudioBuffer samples must be finite")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def with_samples(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate_hz)


@dataclass(frozen=True)
class WriteResult:
    path: Path
    clip_count: int


def _chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        yield cid, body, len(body) < size
        pos += 8 + size + (size & 1)


def read_wav(path) -> AudioBuffer:
    """Read a mono 16-bit PCM or 32-bit float WAV file.

    PCM samples are scaled by 1/32768.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeaderError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    for cid, body, truncated in _chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise MalformedHeaderError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body)
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 40:
                    raise MalformedHeaderError(f"{path}: extensible fmt chunk too short")
                (sub,) = struct.unpack_from("<H", body, 24)
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            if truncated:
                raise MalformedHeaderError(f"{path}: data chunk truncated")
            payload = body
    if fmt is None or payload is None:
        raise MalformedHeaderError(f"{path}: missing fmt or data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if channels != 1:
        raise NotMonoError(f"{path}: {channels} channels, expected mono")
    if rate == 0:
        raise MalformedHeaderError(f"{path}: zero sample rate")
    if tag == WAVE_FORMAT_PCM and bits == 16:
        ints = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2")
        samples = ints.astype(np.float64) / 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedEncodingError(f"{path}: format tag {tag} with {bits} bits")
    return AudioBuffer(samples, rate)


def write_wav(path, buf: AudioBuffer, encoding: str = "pcm16") -> WriteResult:
    """Write ``buf`` as pcm16 (round-to-nearest, clamped) or float32.

    Returns the number of samples that fell outside [-1, 1] and were clamped.
    """
    if len(buf) == 0:
        raise EmptyBufferError("cannot write an empty buffer")
    x = buf.samples
    clip_count = int(np.count_nonzero(np.abs(x) > 1.0))
    rate = buf.sample_rate_hz
    if encoding == "pcm16":
        ints = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")
        payload = ints.tobytes()
        fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, 1, rate, rate * 2, 2, 16)
        header = b"fmt " + struct.pack("<I", 16) + fmt
    elif encoding == "float32":
        payload = np.clip(x, -1.0, 1.0).astype("<f4").tobytes()
        fmt = struct.pack("<HHIIHHH", WAVE_FORMAT_IEEE_FLOAT, 1, rate, rate * 4, 4, 32, 0)
        header = (b"fmt " + struct.pack("<I", 18) + fmt
                  + b"fact" + struct.pack("<II", 4, len(x)))
    else:
        raise UnsupportedEncodingError(f"unknown encoding {encoding!r}")
    body = b"WAVE" + header + b"data" + struct.pack("<I", len(payload)) + payload
    try:
        Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc
    return WriteResult(Path(path), clip_count)


def peak_normalize(buf: AudioBuffer, target_peak: float = 1.0) -> AudioBuffer:
    if not 0.0 < target_peak <= 1.0:
        raise ValueError("target_peak must lie in (0, 1]")
    peak = float(np.max(np.abs(buf.samples))) if len(buf) else 0.0
    if peak == 0.0:
        raise AllZeroSignalError("cannot normalize an all-zero signal")
    if peak == target_peak:
        return buf
    # divide first: target/peak overflows for subnormal peaks
    return buf.with_samples(buf.samples / peak * target_peak)
