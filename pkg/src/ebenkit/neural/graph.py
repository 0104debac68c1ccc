"""Static layer graphs for the generator and the discriminator ensemble.

Every convolution is described by a :class:`ConvSpec`; weight names, shapes
and parameter counts all derive from these lists, so the forward passes,
the initializer and the file format agree by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import NetworkConfig

WAVE_DISC_CHANNELS = (16, 64, 256, 1024)
WAVE_DISC_FIRST_KERNEL = 15
WAVE_DISC_KERNEL = 41
WAVE_DISC_STRIDE = 4
WAVE_DISC_GROUPS = 4
BAND_DISC_MULTIPLIERS = (1, 2, 4, 8)
BAND_DISC_KERNEL = 41
BAND_DISC_STRIDE = 2
LOGIT_KERNEL = 3


@dataclass(frozen=True)
class ConvSpec:
    name: str
    c_in: int
    c_out: int
    kernel: int
    stride: int = 1
    dilation: int = 1
    groups: int = 1
    transposed: bool = False

    @property
    def v_shape(self) -> tuple[int, int, int]:
        # transposed convolutions are stored (C_out, C_in, K) too
        if self.transposed:
            return (self.c_out, self.c_in, self.kernel)
        return (self.c_out, self.c_in // self.groups, self.kernel)

    @property
    def fan_in(self) -> int:
        return self.v_shape[1] * self.kernel

    @property
    def param_count(self) -> int:
        a, b, k = self.v_shape
        return a * b * k + 2 * self.c_out  # v, g, bias

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            f"{self.name}.v": self.v_shape,
            f"{self.name}.g": (self.c_out,),
            f"{self.name}.b": (self.c_out,),
        }


def _residual_units(prefix: str, channels: int, cfg: NetworkConfig) -> list[ConvSpec]:
    out = []
    for r, d in enumerate(cfg.residual_dilations):
        out.append(ConvSpec(f"{prefix}.res{r}.dil", channels, channels, cfg.kernel_size, dilation=d))
        out.append(ConvSpec(f"{prefix}.res{r}.mix", channels, channels, 1))
    return out


def generator_layers(cfg: NetworkConfig) -> list[ConvSpec]:
    """Generator convolutions in execution order."""
    widths = (cfg.first_channels,) + tuple(cfg.encoder_channels)
    layers = [ConvSpec("gen.first", cfg.p_bands, cfg.first_channels, cfg.kernel_size)]
    for j, s in enumerate(cfg.encoder_strides):
        layers.append(ConvSpec(f"gen.enc{j}.down", widths[j], widths[j + 1], 2 * s, stride=s))
        layers += _residual_units(f"gen.enc{j}", widths[j + 1], cfg)
    depth = len(cfg.encoder_strides)
    for i, (s, k) in enumerate(zip(cfg.dec_strides, cfg.dec_kernels)):
        j = depth - 1 - i  # mirrors encoder block j
        layers.append(ConvSpec(f"gen.dec{j}.up", widths[j + 1], widths[j], k, stride=s, transposed=True))
        layers += _residual_units(f"gen.dec{j}", widths[j], cfg)
    layers.append(ConvSpec("gen.last", cfg.first_channels, cfg.m_bands, cfg.kernel_size))
    return layers


def wave_disc_layers(prefix: str) -> list[ConvSpec]:
    c = WAVE_DISC_CHANNELS
    layers = [ConvSpec(f"{prefix}.layer0", 1, c[0], WAVE_DISC_FIRST_KERNEL)]
    for i in range(1, len(c)):
        layers.append(ConvSpec(f"{prefix}.layer{i}", c[i - 1], c[i], WAVE_DISC_KERNEL,
                               stride=WAVE_DISC_STRIDE, groups=WAVE_DISC_GROUPS))
    layers.append(ConvSpec(f"{prefix}.logit", c[-1], 1, LOGIT_KERNEL))
    return layers


def band_disc_layers(prefix: str, cfg: NetworkConfig) -> list[ConvSpec]:
    groups = cfg.q_bands if cfg.disc_grouped else 1
    widths = [cfg.q_bands] + [cfg.disc_base_channels * m for m in BAND_DISC_MULTIPLIERS]
    layers = [
        ConvSpec(f"{prefix}.layer{i}", widths[i], widths[i + 1], BAND_DISC_KERNEL,
                 stride=BAND_DISC_STRIDE, groups=groups)
        for i in range(len(BAND_DISC_MULTIPLIERS))
    ]
    layers.append(ConvSpec(f"{prefix}.logit", widths[-1], 1, LOGIT_KERNEL))
    return layers


def discriminator_layers(cfg: NetworkConfig) -> list[list[ConvSpec]]:
    """One layer list per scale; scale 0 sees the waveform, the rest see bands."""
    scales = [wave_disc_layers("disc0")]
    scales += [band_disc_layers(f"disc{k}", cfg) for k in range(1, cfg.disc_scales)]
    return scales


def all_layers(cfg: NetworkConfig) -> list[ConvSpec]:
    out = generator_layers(cfg)
    for scale in discriminator_layers(cfg):
        out += scale
    return out


def tensor_shapes(cfg: NetworkConfig) -> dict[str, tuple[int, ...]]:
    """Every named tensor and its shape, in initialization order."""
    shapes: dict[str, tuple[int, ...]] = {}
    for spec in all_layers(cfg):
        shapes.update(spec.tensor_shapes())
    return shapes


def count_params(cfg: NetworkConfig) -> tuple[int, int]:
    """(generator, discriminator) parameter counts, with v, g and bias."""
    gen = sum(s.param_count for s in generator_layers(cfg))
    disc = sum(s.param_count for scale in discriminator_layers(cfg) for s in scale)
    return gen, disc
