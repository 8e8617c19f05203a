"""Network blocks: residual dense blocks, the RRDB generator, the
attention gate, and the U-Net discriminator (plain and attention).

Layer naming follows the published checkpoint family, e.g.
``body.3.rdb2.conv4.weight``; residual scaling defaults to 0.2 and the
upsampling head is nearest-neighbor doubling followed by a 3x3 conv.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from ..imgcore import ImageF32, resize
from .ops import (
    avgpool2x,
    bilinear_upsample2x,
    conv2d,
    leaky_relu,
    nearest_upsample2x,
    sigmoid,
)
from .weights import (
    WeightStore,
    discriminator_schema,
    generator_schema,
    validate_schema,
)

DEFAULT_BETA = 0.2


@dataclass(frozen=True)
class GeneratorConfig:
    in_ch: int = 3
    out_ch: int = 3
    num_feat: int = 64
    num_blocks: int = 23
    growth: int = 32
    scale: int = 4
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        for name in ("in_ch", "out_ch", "num_feat", "num_blocks", "growth"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if self.scale != 4:
            raise InvalidArgumentError(f"generator scale is fixed at 4, got {self.scale}")

    def to_dict(self) -> dict:
        return {
            "in_ch": self.in_ch,
            "out_ch": self.out_ch,
            "num_feat": self.num_feat,
            "num_blocks": self.num_blocks,
            "growth": self.growth,
            "scale": self.scale,
            "beta": self.beta,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GeneratorConfig":
        return cls(**{k: raw[k] for k in cls.__dataclass_fields__ if k in raw})


@dataclass(frozen=True)
class DiscriminatorConfig:
    in_ch: int = 3
    num_feat: int = 64
    variant: str = "plain"

    def __post_init__(self):
        if self.variant not in ("plain", "attention"):
            raise InvalidArgumentError(
                f"variant must be 'plain' or 'attention', got {self.variant!r}"
            )
        if self.in_ch < 1 or self.num_feat < 1:
            raise InvalidArgumentError("channel counts must be >= 1")

    def to_dict(self) -> dict:
        return {"in_ch": self.in_ch, "num_feat": self.num_feat, "variant": self.variant}

    @classmethod
    def from_dict(cls, raw: dict) -> "DiscriminatorConfig":
        return cls(**{k: raw[k] for k in cls.__dataclass_fields__ if k in raw})


def _conv(x, w: WeightStore, name: str, stride: int = 1, pad: int = 1, mode: str = "optimized"):
    return conv2d(x, w.get(f"{name}.weight"), w.get(f"{name}.bias"), stride, pad, mode)


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------


def rdb_forward(
    x: np.ndarray, w: WeightStore, beta: float = DEFAULT_BETA, mode: str = "optimized"
) -> np.ndarray:
    """Residual dense block: five 3x3 convs over densely concatenated
    features, leaky-relu after the first four, x + beta * conv5 out."""
    h1 = leaky_relu(_conv(x, w, "conv1", mode=mode))
    h2 = leaky_relu(_conv(np.concatenate([x, h1], axis=1), w, "conv2", mode=mode))
    h3 = leaky_relu(_conv(np.concatenate([x, h1, h2], axis=1), w, "conv3", mode=mode))
    h4 = leaky_relu(_conv(np.concatenate([x, h1, h2, h3], axis=1), w, "conv4", mode=mode))
    h5 = _conv(np.concatenate([x, h1, h2, h3, h4], axis=1), w, "conv5", mode=mode)
    return x + np.float32(beta) * h5


def rrdb_forward(
    x: np.ndarray, w: WeightStore, beta: float = DEFAULT_BETA, mode: str = "optimized"
) -> np.ndarray:
    """Residual-in-residual: x + beta * (rdb3 . rdb2 . rdb1)(x)."""
    out = rdb_forward(x, w.slice("rdb1"), beta, mode)
    out = rdb_forward(out, w.slice("rdb2"), beta, mode)
    out = rdb_forward(out, w.slice("rdb3"), beta, mode)
    return x + np.float32(beta) * out


def generator_forward(
    lr: ImageF32,
    w: WeightStore,
    cfg: GeneratorConfig | None = None,
    mode: str = "optimized",
) -> ImageF32:
    """RRDB generator inference: 4x upscale, output clamped to [0, 1]."""
    if cfg is None:
        cfg = GeneratorConfig.from_dict(w.config)
    validate_schema(w, generator_schema(cfg))
    if lr.channels != cfg.in_ch:
        raise InvalidArgumentError(
            f"input has {lr.channels} channels, generator expects {cfg.in_ch}"
        )
    x = lr.data[np.newaxis, :, :, :]

    fea = _conv(x, w, "conv_first", mode=mode)
    trunk = fea
    for i in range(cfg.num_blocks):
        trunk = rrdb_forward(trunk, w.slice(f"body.{i}"), cfg.beta, mode)
    trunk = _conv(trunk, w, "conv_body", mode=mode)
    fea = fea + trunk

    fea = leaky_relu(_conv(nearest_upsample2x(fea), w, "conv_up1", mode=mode))
    fea = leaky_relu(_conv(nearest_upsample2x(fea), w, "conv_up2", mode=mode))
    out = _conv(leaky_relu(_conv(fea, w, "conv_hr", mode=mode)), w, "conv_last", mode=mode)

    return ImageF32(np.clip(out[0], 0.0, 1.0))


def upscale_image(
    lr: ImageF32,
    w: WeightStore,
    cfg: GeneratorConfig | None = None,
    target_scale: float = 4.0,
    mode: str = "optimized",
) -> ImageF32:
    """Generator inference at an arbitrary target scale.

    The network is fixed at 4x; other scales run the 4x generator and then
    resample bicubically to round(scale * input) per axis. Reports flag
    non-4 scales as approximations.
    """
    out = generator_forward(lr, w, cfg, mode)
    if target_scale == 4.0:
        return out
    tw = max(1, round(lr.width * target_scale))
    th = max(1, round(lr.height * target_scale))
    return resize(out, tw, th, "bicubic")


# ---------------------------------------------------------------------------
# Discriminator
# ---------------------------------------------------------------------------


def attention_gate(
    skip: np.ndarray, gate: np.ndarray, w: WeightStore, mode: str = "optimized"
) -> np.ndarray:
    """Gate a skip connection by a learned per-pixel mask.

    psi = sigmoid(conv1x1(relu(conv1x1(skip pooled 2x) + conv1x1(gate)))),
    upsampled bilinearly back to skip resolution and broadcast over skip
    channels.
    """
    skip = np.asarray(skip)
    gate = np.asarray(gate)
    if skip.shape[2] != gate.shape[2] * 2 or skip.shape[3] != gate.shape[3] * 2:
        raise InvalidArgumentError(
            f"gate {gate.shape[2:]} must be spatially half of skip {skip.shape[2:]}"
        )
    sd = avgpool2x(skip)
    mix = leaky_relu(
        _conv(sd, w, "theta", pad=0, mode=mode) + _conv(gate, w, "phi", pad=0, mode=mode),
        slope=0.0,
    )
    psi = sigmoid(_conv(mix, w, "psi", pad=0, mode=mode))
    psi = bilinear_upsample2x(psi, mode)
    return (skip * psi).astype(np.float32)


def unet_discriminator_forward(
    img: ImageF32,
    w: WeightStore,
    cfg: DiscriminatorConfig | None = None,
    mode: str = "optimized",
) -> ImageF32:
    """U-Net realness map: 3 strided-conv downsamples, bilinear-upsample
    decoder with (optionally attention-gated) skips, sigmoid output in
    (0, 1) at input resolution. Input dims must be divisible by 8."""
    if cfg is None:
        cfg = DiscriminatorConfig.from_dict(w.config)
    validate_schema(w, discriminator_schema(cfg))
    if img.channels != cfg.in_ch:
        raise InvalidArgumentError(
            f"input has {img.channels} channels, discriminator expects {cfg.in_ch}"
        )
    if img.height % 8 or img.width % 8:
        raise InvalidArgumentError(
            f"input dims must be divisible by 8, got {img.width}x{img.height}"
        )
    x = img.data[np.newaxis, :, :, :]

    x0 = leaky_relu(_conv(x, w, "conv0", mode=mode))
    x1 = leaky_relu(_conv(x0, w, "down1", stride=2, pad=1, mode=mode))
    x2 = leaky_relu(_conv(x1, w, "down2", stride=2, pad=1, mode=mode))
    x3 = leaky_relu(_conv(x2, w, "down3", stride=2, pad=1, mode=mode))

    attn = cfg.variant == "attention"
    s2 = attention_gate(x2, x3, w.slice("att3"), mode) if attn else x2
    u3 = leaky_relu(_conv(bilinear_upsample2x(x3, mode), w, "up3", mode=mode)) + s2
    s1 = attention_gate(x1, u3, w.slice("att2"), mode) if attn else x1
    u2 = leaky_relu(_conv(bilinear_upsample2x(u3, mode), w, "up2", mode=mode)) + s1
    s0 = attention_gate(x0, u2, w.slice("att1"), mode) if attn else x0
    u1 = leaky_relu(_conv(bilinear_upsample2x(u2, mode), w, "up1", mode=mode)) + s0

    t = leaky_relu(_conv(u1, w, "tail1", mode=mode))
    t = leaky_relu(_conv(t, w, "tail2", mode=mode))
    out = sigmoid(_conv(t, w, "conv_out", mode=mode))
    return ImageF32(out[0])


def realness_score(
    img: ImageF32,
    w: WeightStore,
    cfg: DiscriminatorConfig | None = None,
    scales: tuple[float, ...] = (1.0, 0.5),
    mode: str = "optimized",
) -> float:
    """Diagnostic multi-scale realness: mean realness map value, averaged
    over the requested scales (each scale scored independently)."""
    vals = []
    for s in scales:
        if s == 1.0:
            scaled = img
        else:
            tw = max(8, int(round(img.width * s)) // 8 * 8)
            th = max(8, int(round(img.height * s)) // 8 * 8)
            scaled = resize(img, tw, th, "bilinear")
        vals.append(float(unet_discriminator_forward(scaled, w, cfg, mode).data.mean()))
    return float(np.mean(vals))
