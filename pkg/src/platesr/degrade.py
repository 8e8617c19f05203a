"""Seeded synthesis of low-resolution blurred plates from high-res crops.

The canonical recipe is a fixed, fully seeded stage order:

    blur -> downscale -> additive Gaussian noise -> JPEG cycle

optionally repeated once (``second_order``) with re-drawn, milder blur and
noise parameters and a randomly split downscale, and optionally finished
with a circular sinc filter (``final_sinc_prob``) that injects ringing.
Every random draw comes from a Philox stream keyed by the config seed, so
identical (image, config) pairs produce byte-identical outputs regardless
of thread count.

Second-order parameter draws: gaussian sigmas are drawn uniformly from
[sigma/2, sigma], theta from [0, pi), sinc cutoff from [cutoff, pi], noise
sigma from [0, noise_sigma], and JPEG quality uniformly from
[quality, min(100, quality + 10)].
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.fft
from scipy.special import j1

from . import rng as rng_mod
from .errors import InvalidArgumentError
from .imgcore import ImageF32, Kernel2D, convolve2d, resize

BLUR_KINDS = ("gaussian_iso", "gaussian_aniso", "sinc")

_FINAL_SINC_SIZE = 21


@dataclass(frozen=True)
class BlurSpec:
    kind: str = "gaussian_iso"
    sigma_x: float = 1.0
    sigma_y: float = 1.0
    theta: float = 0.0
    sinc_cutoff: float = math.pi
    size: int = 7

    def __post_init__(self):
        if self.kind not in BLUR_KINDS:
            raise InvalidArgumentError(f"blur kind must be one of {BLUR_KINDS}, got {self.kind!r}")
        if self.size % 2 == 0 or self.size < 1:
            raise InvalidArgumentError(f"kernel size must be odd >= 1, got {self.size}")
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise InvalidArgumentError("blur sigmas must be positive")
        if not 0.0 <= self.theta < math.pi:
            raise InvalidArgumentError(f"theta must be in [0, pi), got {self.theta}")
        if not 0.0 < self.sinc_cutoff <= math.pi:
            raise InvalidArgumentError(f"sinc cutoff must be in (0, pi], got {self.sinc_cutoff}")


@dataclass(frozen=True)
class DegradationConfig:
    scale_factor: float = 4.0
    blur: BlurSpec = field(default_factory=BlurSpec)
    noise_sigma: float = 0.0
    jpeg_quality: int = 95
    second_order: bool = False
    final_sinc_prob: float = 0.0
    seed: int = 0
    downscale_filter: str = "box"

    def __post_init__(self):
        if self.scale_factor <= 1.0:
            raise InvalidArgumentError(f"scale_factor must be > 1, got {self.scale_factor}")
        if not 0.0 <= self.noise_sigma <= 0.2:
            raise InvalidArgumentError(f"noise_sigma must be in [0, 0.2], got {self.noise_sigma}")
        if not 1 <= int(self.jpeg_quality) <= 100:
            raise InvalidArgumentError(f"jpeg_quality must be in [1, 100], got {self.jpeg_quality}")
        if not 0.0 <= self.final_sinc_prob <= 1.0:
            raise InvalidArgumentError("final_sinc_prob must be in [0, 1]")
        if self.downscale_filter not in ("box", "bilinear"):
            raise InvalidArgumentError(
                f"downscale_filter must be 'box' or 'bilinear', got {self.downscale_filter!r}"
            )

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DegradationConfig":
        raw = json.loads(text)
        blur = BlurSpec(**raw.pop("blur"))
        return cls(blur=blur, **raw)


PRESETS = {
    # Plain proportional reduce with a mild PSF, matching the thesis's
    # quarter-size preprocessing as closely as its description allows.
    "x4-paper": DegradationConfig(
        scale_factor=4.0,
        blur=BlurSpec(kind="gaussian_iso", sigma_x=0.5, sigma_y=0.5, size=7),
        noise_sigma=0.0,
        jpeg_quality=95,
        second_order=False,
        final_sinc_prob=0.0,
    ),
    # Harsher 7.5x reduction with the full second-order chain enabled.
    "x7.5-star": DegradationConfig(
        scale_factor=7.5,
        blur=BlurSpec(kind="gaussian_iso", sigma_x=1.0, sigma_y=1.0, size=9),
        noise_sigma=0.02,
        jpeg_quality=80,
        second_order=True,
        final_sinc_prob=0.8,
    ),
}


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def gaussian_kernel(spec: BlurSpec) -> Kernel2D:
    """Normalized (an)isotropic Gaussian: taps proportional to
    exp(-0.5 d^T Sigma^-1 d) with Sigma built from (sigma_x, sigma_y, theta)."""
    if spec.kind not in ("gaussian_iso", "gaussian_aniso"):
        raise InvalidArgumentError(f"gaussian_kernel got blur kind {spec.kind!r}")
    half = spec.size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    dx, dy = np.meshgrid(ax, ax)  # dx varies along columns, dy along rows

    if spec.kind == "gaussian_iso":
        sx = sy = spec.sigma_x
        theta = 0.0
    else:
        sx, sy, theta = spec.sigma_x, spec.sigma_y, spec.theta

    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    sigma = rot @ np.diag([sx * sx, sy * sy]) @ rot.T
    inv = np.linalg.inv(sigma)
    quad = inv[0, 0] * dx * dx + 2.0 * inv[0, 1] * dx * dy + inv[1, 1] * dy * dy
    taps = np.exp(-0.5 * quad)
    return Kernel2D(taps / taps.sum())


def sinc_kernel(cutoff: float, size: int) -> Kernel2D:
    """Circularly symmetric ideal low-pass (ringing injector).

    tap(i, j) is proportional to cutoff * J1(cutoff * r) / (2 pi r) with
    r = sqrt(i^2 + j^2); the center tap is cutoff^2 / (4 pi). Normalized to
    sum 1; taps may be negative.
    """
    if not 0.0 < cutoff <= math.pi:
        raise InvalidArgumentError(f"cutoff must be in (0, pi], got {cutoff}")
    if size % 2 == 0 or size < 1:
        raise InvalidArgumentError(f"size must be odd >= 1, got {size}")
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    dx, dy = np.meshgrid(ax, ax)
    r = np.hypot(dx, dy)
    with np.errstate(divide="ignore", invalid="ignore"):
        taps = cutoff * j1(cutoff * r) / (2.0 * math.pi * r)
    taps[half, half] = cutoff * cutoff / (4.0 * math.pi)
    return Kernel2D(taps / taps.sum())


def kernel_for(spec: BlurSpec) -> Kernel2D:
    if spec.kind == "sinc":
        return sinc_kernel(spec.sinc_cutoff, spec.size)
    return gaussian_kernel(spec)


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


def add_gaussian_noise(img: ImageF32, sigma: float, rng: np.random.Generator) -> ImageF32:
    """Add per-sample i.i.d. N(0, sigma^2), clamp to [0, 1].

    Fully determined by the generator state; sigma = 0 returns the input
    unchanged without consuming randomness.
    """
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img
    noise = rng.normal(0.0, sigma, size=img.data.shape)
    out = np.clip(img.data.astype(np.float64) + noise, 0.0, 1.0)
    return ImageF32(out.astype(np.float32))


# ---------------------------------------------------------------------------
# JPEG cycle (in-memory: pixel damage only, no entropy coding)
# ---------------------------------------------------------------------------

# ITU-T T.81 Annex K reference quantization tables.
_Q_LUMA = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

_Q_CHROMA = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.float64,
)


def _scaled_table(base: np.ndarray, quality: int) -> np.ndarray:
    if quality < 50:
        scale = 5000.0 / quality
    else:
        scale = 200.0 - 2.0 * quality
    table = np.floor((base * scale + 50.0) / 100.0)
    return np.clip(table, 1.0, 255.0)


def _quantize_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    """DCT / quantize / dequantize / inverse DCT over 8x8 blocks.

    plane is float64 in centered units (pixel - 128); edges must already be
    padded to multiples of 8.
    """
    h, w = plane.shape
    blocks = plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    coef = scipy.fft.dctn(blocks, type=2, norm="ortho", axes=(2, 3))
    coef = np.round(coef / table) * table
    blocks = scipy.fft.idctn(coef, type=2, norm="ortho", axes=(2, 3))
    return blocks.transpose(0, 2, 1, 3).reshape(h, w)


def jpeg_cycle(img: ImageF32, quality: int) -> ImageF32:
    """Round-trip through simulated baseline JPEG at the given quality.

    RGB goes through full-range BT.601 YCbCr with 4:4:4 sampling; each
    channel is 8x8 DCT-quantized with the Annex K tables scaled by the
    standard quality mapping. Single-channel input uses the luminance
    table directly. Output is clamped to [0, 1].
    """
    quality = int(quality)
    if not 1 <= quality <= 100:
        raise InvalidArgumentError(f"quality must be in [1, 100], got {quality}")

    h, w = img.height, img.width
    pad_h = (-h) % 8
    pad_w = (-w) % 8

    if img.channels == 1:
        planes = [img.data[0].astype(np.float64) * 255.0]
        tables = [_scaled_table(_Q_LUMA, quality)]
    else:
        rgb = img.data.astype(np.float64) * 255.0
        r, g, b = rgb[0], rgb[1], rgb[2]
        y = 0.299 * r + 0.587 * g + 0.114 * b
        cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
        cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
        planes = [y, cb, cr]
        tq = _scaled_table(_Q_LUMA, quality)
        cq = _scaled_table(_Q_CHROMA, quality)
        tables = [tq, cq, cq]

    coded = []
    for plane, table in zip(planes, tables):
        padded = np.pad(plane, ((0, pad_h), (0, pad_w)), mode="edge")
        out = _quantize_plane(padded - 128.0, table) + 128.0
        coded.append(out[:h, :w])

    if img.channels == 1:
        result = coded[0][np.newaxis, :, :]
    else:
        y, cb, cr = coded
        r = y + 1.402 * (cr - 128.0)
        g = y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0)
        b = y + 1.772 * (cb - 128.0)
        result = np.stack([r, g, b])

    return ImageF32(np.clip(result / 255.0, 0.0, 1.0).astype(np.float32))


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def _redraw_blur(spec: BlurSpec, rng: np.random.Generator) -> BlurSpec:
    """Second-order blur: same kind and size, milder re-drawn parameters."""
    if spec.kind == "sinc":
        cutoff = float(rng.uniform(spec.sinc_cutoff, math.pi))
        return BlurSpec(kind="sinc", sinc_cutoff=cutoff, size=spec.size)
    sx = float(rng.uniform(spec.sigma_x * 0.5, spec.sigma_x))
    sy = float(rng.uniform(spec.sigma_y * 0.5, spec.sigma_y))
    theta = float(rng.uniform(0.0, math.pi)) if spec.kind == "gaussian_aniso" else 0.0
    return BlurSpec(kind=spec.kind, sigma_x=sx, sigma_y=sy, theta=theta, size=spec.size)


def degrade_pipeline(
    img: ImageF32, cfg: DegradationConfig, rng: np.random.Generator | None = None
) -> ImageF32:
    """Run the canonical degradation chain; see module docstring.

    Output dimensions are exactly floor(input / scale_factor) per axis.
    Pass an externally derived generator to key the stream by record id;
    by default the stream comes from cfg.seed alone.
    """
    out_w = int(img.width / cfg.scale_factor)
    out_h = int(img.height / cfg.scale_factor)
    if out_w < 1 or out_h < 1:
        raise InvalidArgumentError(
            f"target dimensions {out_w}x{out_h} below 1 for scale {cfg.scale_factor}"
        )
    if rng is None:
        rng = rng_mod.stream(cfg.seed)

    x = convolve2d(img, kernel_for(cfg.blur))

    if cfg.second_order:
        mid_w = max(out_w, round(img.width / math.sqrt(cfg.scale_factor)))
        mid_h = max(out_h, round(img.height / math.sqrt(cfg.scale_factor)))
        x = resize(x, mid_w, mid_h, cfg.downscale_filter)
        x = add_gaussian_noise(x, cfg.noise_sigma, rng)
        x = jpeg_cycle(x, cfg.jpeg_quality)

        x = convolve2d(x, kernel_for(_redraw_blur(cfg.blur, rng)))
        x = resize(x, out_w, out_h, cfg.downscale_filter)
        sigma2 = float(rng.uniform(0.0, cfg.noise_sigma)) if cfg.noise_sigma > 0 else 0.0
        x = add_gaussian_noise(x, sigma2, rng)
        quality2 = int(rng.integers(cfg.jpeg_quality, min(100, cfg.jpeg_quality + 10) + 1))
        x = jpeg_cycle(x, quality2)
    else:
        x = resize(x, out_w, out_h, cfg.downscale_filter)
        x = add_gaussian_noise(x, cfg.noise_sigma, rng)
        x = jpeg_cycle(x, cfg.jpeg_quality)

    if cfg.final_sinc_prob > 0 and rng.random() < cfg.final_sinc_prob:
        cutoff = float(rng.uniform(math.pi / 3.0, math.pi))
        size = min(_FINAL_SINC_SIZE, _odd_at_most(min(out_w, out_h) * 2 + 1))
        x = convolve2d(x, sinc_kernel(cutoff, size))

    return x.clamped()


def _odd_at_most(n: int) -> int:
    n = max(1, n)
    return n if n % 2 == 1 else n - 1
