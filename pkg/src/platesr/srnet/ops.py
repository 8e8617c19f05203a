"""Tensor primitives for network inference.

Tensors are plain numpy arrays shaped (batch, channels, height, width),
float32 between layers; convolutions accumulate in float64 internally.

conv2d accepts even kernel sizes: the stride-2 encoder of the U-Net
discriminator needs 4x4 kernels for its output dimensions to divide
exactly, which odd kernels cannot satisfy on even inputs.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError

EXECUTION_MODES = ("optimized", "reference")


def _check_tensor4(x: np.ndarray, name: str = "x") -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 4:
        raise InvalidArgumentError(f"{name} must be rank-4 (n, c, h, w), got ndim={x.ndim}")
    if min(x.shape) < 1:
        raise InvalidArgumentError(f"{name} has a zero dimension: {x.shape}")
    return x


def _check_mode(mode: str) -> None:
    if mode not in EXECUTION_MODES:
        raise InvalidArgumentError(f"mode must be one of {EXECUTION_MODES}, got {mode!r}")


def conv2d(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    pad: int = 0,
    mode: str = "optimized",
) -> np.ndarray:
    """Cross-correlation with zero padding.

    weights is (out_ch, in_ch, kh, kw); output spatial dims are
    (h + 2 pad - kh) / stride + 1 and the division must be exact.
    """
    _check_mode(mode)
    x = _check_tensor4(x)
    weights = np.asarray(weights)
    bias = np.asarray(bias)
    if weights.ndim != 4:
        raise InvalidArgumentError(f"weights must be rank-4, got ndim={weights.ndim}")
    out_ch, in_ch, kh, kw = weights.shape
    if x.shape[1] != in_ch:
        raise InvalidArgumentError(
            f"input has {x.shape[1]} channels but weights expect {in_ch}"
        )
    if bias.shape != (out_ch,):
        raise InvalidArgumentError(f"bias must have shape ({out_ch},), got {bias.shape}")
    if stride < 1 or pad < 0:
        raise InvalidArgumentError(f"need stride >= 1 and pad >= 0, got {stride}, {pad}")

    n, _, h, w = x.shape
    span_h = h + 2 * pad - kh
    span_w = w + 2 * pad - kw
    if span_h < 0 or span_w < 0:
        raise InvalidArgumentError(
            f"kernel {kh}x{kw} larger than padded input {h + 2 * pad}x{w + 2 * pad}"
        )
    if span_h % stride or span_w % stride:
        raise InvalidArgumentError(
            f"non-integral output dims: ({h}+2*{pad}-{kh})/{stride} must divide exactly"
        )
    out_h = span_h // stride + 1
    out_w = span_w // stride + 1

    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))).astype(np.float64)
    w64 = weights.astype(np.float64)
    b64 = bias.astype(np.float64)

    if mode == "optimized":
        win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
        win = win[:, :, ::stride, ::stride]
        out = np.tensordot(win, w64, axes=([1, 4, 5], [1, 2, 3]))
        out = np.moveaxis(out, 3, 1) + b64[None, :, None, None]
    else:
        out = np.empty((n, out_ch, out_h, out_w), dtype=np.float64)
        for bi in range(n):
            for oy in range(out_h):
                for ox in range(out_w):
                    patch = xp[bi, :, oy * stride : oy * stride + kh, ox * stride : ox * stride + kw]
                    for oc in range(out_ch):
                        out[bi, oc, oy, ox] = float(np.sum(patch * w64[oc])) + b64[oc]
    return out.astype(np.float32)


def leaky_relu(x: np.ndarray, slope: float = 0.2) -> np.ndarray:
    """y = x for x >= 0 else slope * x, elementwise."""
    x = np.asarray(x)
    return np.where(x >= 0, x, np.float32(slope) * x).astype(np.float32)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (1.0 / (1.0 + np.exp(-x))).astype(np.float32)


def nearest_upsample2x(x: np.ndarray) -> np.ndarray:
    x = _check_tensor4(x)
    return x.repeat(2, axis=2).repeat(2, axis=3)


def _bilinear2x_axis_weights(in_size: int) -> np.ndarray:
    """(2n, n) half-pixel bilinear doubling matrix with edge clamp."""
    out_size = in_size * 2
    w = np.zeros((out_size, in_size), dtype=np.float64)
    pos = (np.arange(out_size) + 0.5) * 0.5 - 0.5
    base = np.floor(pos).astype(np.int64)
    frac = pos - base
    for i in range(out_size):
        j0 = min(max(base[i], 0), in_size - 1)
        j1 = min(max(base[i] + 1, 0), in_size - 1)
        w[i, j0] += 1.0 - frac[i]
        w[i, j1] += frac[i]
    return w


def bilinear_upsample2x(x: np.ndarray, mode: str = "optimized") -> np.ndarray:
    """Double both spatial dims with half-pixel bilinear interpolation."""
    _check_mode(mode)
    x = _check_tensor4(x)
    n, c, h, w = x.shape
    wv = _bilinear2x_axis_weights(h)
    wh = _bilinear2x_axis_weights(w)
    x64 = x.astype(np.float64)
    if mode == "optimized":
        out = np.einsum("Hh,nchw,Ww->ncHW", wv, x64, wh, optimize=True)
    else:
        out = np.zeros((n, c, 2 * h, 2 * w), dtype=np.float64)
        for oy in range(2 * h):
            for ox in range(2 * w):
                acc = np.zeros((n, c), dtype=np.float64)
                for sy in np.nonzero(wv[oy])[0]:
                    for sx in np.nonzero(wh[ox])[0]:
                        acc += wv[oy, sy] * wh[ox, sx] * x64[:, :, sy, sx]
                out[:, :, oy, ox] = acc
    return out.astype(np.float32)


def avgpool2x(x: np.ndarray) -> np.ndarray:
    """2x2 mean pooling; spatial dims must be even."""
    x = _check_tensor4(x)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise InvalidArgumentError(f"avgpool2x needs even spatial dims, got {h}x{w}")
    x64 = x.astype(np.float64)
    out = x64.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    return out.astype(np.float32)
