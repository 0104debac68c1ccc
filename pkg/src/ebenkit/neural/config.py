"""Network hyperparameters and their validation."""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

from ..errors import (
    BandCountOrderError,
    InvalidParamsError,
    InvalidQError,
    IoFailureError,
    KernelStrideMismatchError,
)


class BandwidthWarning(UserWarning):
    """The P lowest bands do not cover the declared degradation cutoff."""


@dataclass(frozen=True)
class NetworkConfig:
    m_bands: int = 4
    p_bands: int = 1
    q_bands: int = 3
    encoder_strides: tuple[int, ...] = (2, 4, 4)
    encoder_channels: tuple[int, ...] = (64, 128, 256)
    residual_dilations: tuple[int, ...] = (1, 3, 9)
    first_channels: int = 32
    kernel_size: int = 3
    # None means 2 * stride for every decoder block, mirrored from the encoder
    decoder_strides: tuple[int, ...] | None = None
    decoder_kernels: tuple[int, ...] | None = None
    disc_base_channels: int = 30
    disc_grouped: bool = True
    disc_scales: int = 4
    leaky_slope_gen: float = 0.01
    leaky_slope_disc: float = 0.2
    taps_per_band: int = 8
    atten_db: float = 72.0
    sample_rate_hz: int = 16000
    degradation_cutoff_hz: float | None = None

    def __post_init__(self):
        for name in ("encoder_strides", "encoder_channels", "residual_dilations",
                     "decoder_strides", "decoder_kernels"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(int(e) for e in v))

    @property
    def dec_strides(self) -> tuple[int, ...]:
        """Decoder strides, outermost-last (the order blocks are applied)."""
        if self.decoder_strides is not None:
            return self.decoder_strides
        return tuple(reversed(self.encoder_strides))

    @property
    def dec_kernels(self) -> tuple[int, ...]:
        if self.decoder_kernels is not None:
            return self.decoder_kernels
        return tuple(2 * s for s in self.dec_strides)

    @property
    def hop(self) -> int:
        """Input length granularity: M times the total encoder downsampling."""
        total = 1
        for s in self.encoder_strides:
            total *= s
        return self.m_bands * total

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InvalidParamsError(f"unknown config fields: {unknown}")
        return cls(**d)


REFERENCE_CONFIG = NetworkConfig()


def load_config(path) -> NetworkConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParamsError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise InvalidParamsError(f"{path}: config must be a JSON object")
    return NetworkConfig.from_dict(d)


def admissible_q(cfg: NetworkConfig) -> list[int]:
    """Band-discriminator widths Q whose grouped convolutions divide evenly."""
    base = cfg.disc_base_channels
    return [q for q in range(1, base) if base % q == 0]


def validate_config(cfg: NetworkConfig) -> None:
    """Reject any inconsistent configuration with a named error.

    Emits :class:`BandwidthWarning` when a declared degradation cutoff lies
    above the band range kept for the generator (P/M < 2 Fc / Fs).
    """
    m, p, q = cfg.m_bands, cfg.p_bands, cfg.q_bands
    if m < 2:
        raise BandCountOrderError(f"m_bands must be >= 2, got {m}")
    if not 1 <= p <= m:
        raise BandCountOrderError(f"p_bands must lie in [1, {m}], got {p}")
    if not 1 <= q <= m:
        raise BandCountOrderError(f"q_bands must lie in [1, {m}], got {q}")
    if cfg.disc_base_channels < 2:
        raise InvalidParamsError("disc_base_channels must be >= 2")
    if cfg.disc_grouped and q not in admissible_q(cfg):
        raise InvalidQError(f"q_bands={q} not in admissible set {admissible_q(cfg)}")

    enc_s, enc_c = cfg.encoder_strides, cfg.encoder_channels
    if len(enc_s) == 0 or len(enc_s) != len(enc_c):
        raise InvalidParamsError("encoder_strides and encoder_channels must be non-empty and equal length")
    if any(s < 1 for s in enc_s) or any(c < 1 for c in enc_c):
        raise InvalidParamsError("strides and channel widths must be positive")
    if cfg.first_channels < p:
        raise InvalidParamsError("first_channels must be >= p_bands for the input skip")
    if cfg.kernel_size < 1 or cfg.kernel_size % 2 == 0:
        raise InvalidParamsError("kernel_size must be odd and positive")
    if not cfg.residual_dilations or any(d < 1 for d in cfg.residual_dilations):
        raise InvalidParamsError("residual_dilations must be positive")
    if tuple(reversed(cfg.dec_strides)) != tuple(enc_s):
        raise KernelStrideMismatchError(
            f"decoder strides {list(cfg.dec_strides)} do not mirror encoder strides {list(enc_s)}"
        )
    if len(cfg.dec_kernels) != len(enc_s):
        raise KernelStrideMismatchError("one decoder kernel per decoder block is required")
    for k, s in zip(cfg.dec_kernels, cfg.dec_strides):
        if k < s or k % s:
            raise KernelStrideMismatchError(f"transposed-conv kernel {k} is not a multiple of stride {s}")

    if cfg.disc_scales < 1:
        raise InvalidParamsError("disc_scales must be >= 1")
    if not (0 <= cfg.leaky_slope_gen < 1 and 0 <= cfg.leaky_slope_disc < 1):
        raise InvalidParamsError("leaky slopes must lie in [0, 1)")
    if cfg.taps_per_band < 4 or cfg.atten_db < 40:
        raise InvalidParamsError("taps_per_band must be >= 4 and atten_db >= 40")
    if cfg.sample_rate_hz <= 0:
        raise InvalidParamsError("sample_rate_hz must be positive")

    fc = cfg.degradation_cutoff_hz
    if fc is not None and p / m < 2.0 * fc / cfg.sample_rate_hz:
        warnings.warn(
            f"P/M = {p}/{m} keeps up to {cfg.sample_rate_hz * p / (2 * m):.0f} Hz, "
            f"below the declared cutoff {fc:.0f} Hz",
            BandwidthWarning,
            stacklevel=2,
        )
