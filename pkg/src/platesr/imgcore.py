"""Numeric image substrate.

Planar float32 images in nominal [0, 1], plus the primitives the rest of the
pipeline is built from: resampling, 2-D convolution, grayscale conversion,
Otsu thresholding, and 8-bit PNG I/O.

Conventions fixed here and relied on everywhere else:

* resampling uses half-pixel centers: output sample i reads source
  coordinate (i + 0.5) * in/out - 0.5,
* bicubic is the Keys kernel with a = -0.5,
* convolution borders reflect without repeating the edge sample
  (numpy pad mode "reflect", scipy mode "mirror"),
* samples are clamped to [0, 1] only at pipeline boundaries (file I/O,
  metric input), never inside intermediate ops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage
from PIL import Image

from .errors import DegenerateInputError, InvalidArgumentError

RESIZE_FILTERS = ("nearest", "bilinear", "bicubic", "box")

# BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass(frozen=True)
class ImageF32:
    """Planar floating-point image.

    data has shape (channels, height, width), dtype float32, and is made
    read-only at construction. All samples must be finite; values are
    nominally in [0, 1] but intermediate ops may overshoot.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[np.newaxis, :, :]
        if arr.ndim != 3:
            raise InvalidArgumentError(
                f"image data must be (channels, height, width), got shape {arr.shape}"
            )
        if arr.shape[0] not in (1, 3):
            raise InvalidArgumentError(f"channels must be 1 or 3, got {arr.shape[0]}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise InvalidArgumentError(f"image dimensions must be >= 1, got {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("image samples must be finite (no NaN/Inf)")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_interleaved(cls, arr: np.ndarray) -> "ImageF32":
        """Build from an (h, w) or (h, w, c) array."""
        arr = np.asarray(arr)
        if arr.ndim == 2:
            return cls(arr[np.newaxis, :, :])
        if arr.ndim == 3:
            return cls(np.moveaxis(arr, 2, 0))
        raise InvalidArgumentError(f"expected 2-D or 3-D array, got ndim={arr.ndim}")

    def to_interleaved(self) -> np.ndarray:
        """Return an (h, w, c) float32 copy."""
        return np.moveaxis(self.data, 0, 2).copy()

    def clamped(self) -> "ImageF32":
        """Copy with samples clipped to [0, 1] (pipeline-boundary use)."""
        return ImageF32(np.clip(self.data, 0.0, 1.0))


@dataclass(frozen=True)
class Kernel2D:
    """Square 2-D kernel with odd size (defined center).

    Blur kernels produced by the degradation module sum to 1; sinc taps may
    be negative but still sum to 1.
    """

    taps: np.ndarray

    def __post_init__(self):
        taps = np.ascontiguousarray(np.asarray(self.taps), dtype=np.float64)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1]:
            raise InvalidArgumentError(f"kernel taps must be square, got {taps.shape}")
        if taps.shape[0] % 2 == 0 or taps.shape[0] < 1:
            raise InvalidArgumentError(f"kernel size must be odd >= 1, got {taps.shape[0]}")
        if not np.all(np.isfinite(taps)):
            raise InvalidArgumentError("kernel taps must be finite")
        taps.flags.writeable = False
        object.__setattr__(self, "taps", taps)

    @property
    def size(self) -> int:
        return self.taps.shape[0]


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def _keys_cubic(t: np.ndarray) -> np.ndarray:
    """Keys cubic convolution kernel, a = -0.5."""
    a = -0.5
    t = np.abs(t)
    t2 = t * t
    t3 = t2 * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def _axis_weights(filter: str, in_size: int, out_size: int) -> np.ndarray:
    """Row-stochastic (out_size, in_size) resampling matrix for one axis."""
    w = np.zeros((out_size, in_size), dtype=np.float64)
    scale = in_size / out_size

    if filter == "nearest":
        src = np.floor((np.arange(out_size) + 0.5) * scale).astype(np.int64)
        np.clip(src, 0, in_size - 1, out=src)
        w[np.arange(out_size), src] = 1.0
        return w

    if filter == "box":
        # Exact footprint average: output i covers source [i*s, (i+1)*s).
        for i in range(out_size):
            lo = i * scale
            hi = (i + 1) * scale
            j0 = int(np.floor(lo))
            j1 = min(int(np.ceil(hi)), in_size)
            for j in range(j0, j1):
                overlap = min(hi, j + 1) - max(lo, j)
                if overlap > 0:
                    w[i, j] = overlap / scale
        return w

    pos = (np.arange(out_size) + 0.5) * scale - 0.5
    base = np.floor(pos).astype(np.int64)
    frac = pos - base

    if filter == "bilinear":
        offsets = np.array([0, 1])
        taps = np.stack([1.0 - frac, frac], axis=1)
    elif filter == "bicubic":
        offsets = np.array([-1, 0, 1, 2])
        taps = _keys_cubic(frac[:, None] - offsets[None, :])
    else:
        raise InvalidArgumentError(
            f"unknown filter {filter!r}, expected one of {RESIZE_FILTERS}"
        )

    idx = np.clip(base[:, None] + offsets[None, :], 0, in_size - 1)
    for i in range(out_size):
        np.add.at(w[i], idx[i], taps[i])
    return w


def resize(img: ImageF32, out_w: int, out_h: int, filter: str = "bilinear") -> ImageF32:
    """Resample to (out_w, out_h) with the given filter.

    nearest/bilinear/bicubic sample at half-pixel centers with edge clamp;
    box averages the exact source footprint and is the clean-downscale
    choice. Same-size resize reproduces the input bitwise.
    """
    if out_w < 1 or out_h < 1:
        raise InvalidArgumentError(f"output dimensions must be >= 1, got {out_w}x{out_h}")
    if filter not in RESIZE_FILTERS:
        raise InvalidArgumentError(
            f"unknown filter {filter!r}, expected one of {RESIZE_FILTERS}"
        )
    wh = _axis_weights(filter, img.width, out_w)
    wv = _axis_weights(filter, img.height, out_h)
    out = np.empty((img.channels, out_h, out_w), dtype=np.float32)
    for c in range(img.channels):
        plane = img.data[c].astype(np.float64)
        out[c] = (wv @ plane @ wh.T).astype(np.float32)
    return ImageF32(out)


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------


def convolve2d(img: ImageF32, k: Kernel2D, border: str = "reflect") -> ImageF32:
    """Per-channel correlation with reflected borders, same output size."""
    if border != "reflect":
        raise InvalidArgumentError(f"unsupported border mode {border!r}")
    out = np.empty_like(img.data)
    for c in range(img.channels):
        plane = img.data[c].astype(np.float64)
        out[c] = scipy.ndimage.correlate(plane, k.taps, mode="mirror").astype(np.float32)
    return ImageF32(out)


# ---------------------------------------------------------------------------
# Color and thresholding
# ---------------------------------------------------------------------------


def to_gray(img: ImageF32) -> ImageF32:
    """Luma conversion with BT.601 weights; 1-channel input passes through."""
    if img.channels == 1:
        return img
    gray = np.tensordot(_LUMA, img.data.astype(np.float64), axes=(0, 0))
    return ImageF32(gray.astype(np.float32)[np.newaxis, :, :])


def otsu_binarize(gray: ImageF32) -> tuple[float, ImageF32]:
    """Global threshold maximizing between-class variance over 256 bins.

    Returns (threshold, binary image with values in {0, 1}); samples above
    the threshold map to 1. Raises DegenerateInputError if the image is
    constant (no separating threshold exists).
    """
    if gray.channels != 1:
        raise InvalidArgumentError("otsu_binarize expects a single-channel image")
    samples = gray.data.ravel().astype(np.float64)
    bins = np.clip(np.floor(samples * 256.0).astype(np.int64), 0, 255)
    hist = np.bincount(bins, minlength=256).astype(np.float64)
    total = hist.sum()

    prob = hist / total
    omega0 = np.cumsum(prob)  # class 0: bins <= k
    mu = np.cumsum(prob * np.arange(256))
    mu_total = mu[-1]
    omega1 = 1.0 - omega0
    valid = (omega0 > 0) & (omega1 > 0)
    if not np.any(valid):
        raise DegenerateInputError("constant image: no separating threshold")
    sigma_b = np.zeros(256)
    sigma_b[valid] = (mu_total * omega0[valid] - mu[valid]) ** 2 / (
        omega0[valid] * omega1[valid]
    )
    if sigma_b.max() <= 0.0:
        raise DegenerateInputError("constant image: no separating threshold")

    k = int(np.argmax(sigma_b))
    # Place the threshold midway between the two classes' boundary samples
    # so value thresholding agrees exactly with the bin partition.
    low = bins <= k
    threshold = float(samples[low].max() + samples[~low].min()) / 2.0
    binary = (gray.data > np.float32(threshold)).astype(np.float32)
    return threshold, ImageF32(binary)


# ---------------------------------------------------------------------------
# PNG I/O (8-bit; the only external image format)
# ---------------------------------------------------------------------------


def read_png(path) -> ImageF32:
    """Load an 8-bit PNG as [0, 1] floats; L stays single-channel, everything
    else converts to RGB."""
    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float32) / 255.0
            return ImageF32(arr[np.newaxis, :, :])
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return ImageF32.from_interleaved(arr)


def write_png(img: ImageF32, path) -> None:
    """Write as 8-bit PNG: clamp to [0, 1], then round(v * 255)."""
    arr = np.clip(img.data.astype(np.float64), 0.0, 1.0)
    arr = np.floor(arr * 255.0 + 0.5).astype(np.uint8)
    if img.channels == 1:
        Image.fromarray(arr[0], mode="L").save(path)
    else:
        Image.fromarray(np.moveaxis(arr, 0, 2), mode="RGB").save(path)
