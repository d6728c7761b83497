"""Raster primitives shared by all visual feature modules.

Images are 8-bit RGB or grayscale (`ImageBuffer`); intermediate results are
real-valued planes in [0, 1] unless stated otherwise (`FloatPlane`).  All
convolutions use replicate padding.  Every function here is pure and safe to
call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class ImageBuffer:
    """Decoded raster image: 8-bit samples, row-major, 3 (RGB) or 1 (gray) channels."""

    width: int
    height: int
    channels: int
    data: np.ndarray  # shape (height, width, channels), dtype uint8

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"{(self.height, self.width, self.channels)}"
            )
        if self.data.dtype != np.uint8:
            raise ValueError("data must be uint8")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        """Build from an (h, w), (h, w, 1) or (h, w, 3) uint8 array."""
        a = np.asarray(arr, dtype=np.uint8)
        if a.ndim == 2:
            a = a[:, :, None]
        h, w, c = a.shape
        return cls(width=w, height=h, channels=c, data=np.ascontiguousarray(a))


@dataclass(frozen=True)
class FloatPlane:
    """Real-valued plane, row-major. NaN/inf are forbidden."""

    width: int
    height: int
    data: np.ndarray  # shape (height, width), dtype float64

    def __post_init__(self):
        if self.data.shape != (self.height, self.width):
            raise ValueError(
                f"data shape {self.data.shape} does not match {(self.height, self.width)}"
            )
        if not np.isfinite(self.data).all():
            raise ValueError("plane contains non-finite values")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FloatPlane":
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("plane array must be 2-d")
        return cls(width=a.shape[1], height=a.shape[0], data=a)


def ensure_rgb(img: ImageBuffer) -> ImageBuffer:
    """Promote a grayscale buffer to RGB; 3-channel input passes through."""
    if img.channels == 3:
        return img
    return ImageBuffer.from_array(np.repeat(img.data, 3, axis=2))


def to_grayscale(img: ImageBuffer) -> FloatPlane:
    """Luminance plane in [0, 1]: 0.299 R + 0.587 G + 0.114 B.

    Single-channel input passes through (rescaled to [0, 1]).
    """
    if img.channels == 1:
        return FloatPlane.from_array(img.data[:, :, 0].astype(np.float64) / 255.0)
    rgb = img.data.astype(np.float64)
    lum = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return FloatPlane.from_array(lum / 255.0)


def rgb_to_hsv(img: ImageBuffer) -> tuple[FloatPlane, FloatPlane, FloatPlane]:
    """Hexcone HSV: H in degrees [0, 360), S and V in [0, 1].

    Achromatic pixels (max == min) get H = 0 and S = 0.
    """
    if img.channels != 3:
        raise ValueError("rgb_to_hsv requires a 3-channel image")
    rgb = img.data.astype(np.float64) / 255.0
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    cmax = np.max(rgb, axis=2)
    cmin = np.min(rgb, axis=2)
    delta = cmax - cmin

    h = np.zeros_like(cmax)
    chromatic = delta > 0
    # np.errstate: delta==0 entries are masked out afterwards
    with np.errstate(divide="ignore", invalid="ignore"):
        hr = np.mod((g - b) / delta, 6.0)
        hg = (b - r) / delta + 2.0
        hb = (r - g) / delta + 4.0
    h = np.where(chromatic & (cmax == r), hr, h)
    h = np.where(chromatic & (cmax == g) & (cmax != r), hg, h)
    h = np.where(chromatic & (cmax == b) & (cmax != r) & (cmax != g), hb, h)
    h = np.where(chromatic, (h * 60.0) % 360.0, 0.0)

    s = np.zeros_like(cmax)
    nz = cmax > 0
    s[nz] = delta[nz] / cmax[nz]
    s = np.where(chromatic, s, 0.0)

    return (
        FloatPlane.from_array(h),
        FloatPlane.from_array(s),
        FloatPlane.from_array(cmax),
    )


def hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Inverse hexcone transform; used by round-trip tests. Returns float RGB in [0,1]."""
    h = np.asarray(h, dtype=np.float64) % 360.0
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    c = v * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    z = np.zeros_like(h)
    sector = np.floor(hp).astype(int) % 6
    r1 = np.choose(sector, [c, x, z, z, x, c])
    g1 = np.choose(sector, [x, c, c, x, z, z])
    b1 = np.choose(sector, [z, z, x, c, c, x])
    m = v - c
    return np.stack([r1 + m, g1 + m, b1 + m], axis=-1)


def convolve2d(plane: FloatPlane, kernel: np.ndarray) -> FloatPlane:
    """Same-size 2-d convolution with replicate padding. Kernel dims must be odd."""
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise ValueError("kernel must be 2-d with odd dimensions")
    out = ndimage.convolve(plane.data, k, mode="nearest")
    return FloatPlane.from_array(out)


def integral_image(plane: FloatPlane) -> FloatPlane:
    """Summed-area table with a leading zero row/column.

    Output is (height+1, width+1); the sum of any pixel rectangle
    [y0:y1, x0:x1) is ``ii[y1,x1] - ii[y0,x1] - ii[y1,x0] + ii[y0,x0]``
    (see :func:`rect_sum`).
    """
    ii = np.zeros((plane.height + 1, plane.width + 1), dtype=np.float64)
    np.cumsum(np.cumsum(plane.data, axis=0), axis=1, out=ii[1:, 1:])
    return FloatPlane(width=plane.width + 1, height=plane.height + 1, data=ii)


def rect_sum(ii: FloatPlane, y0: int, x0: int, y1: int, x1: int) -> float:
    """Sum of the half-open pixel rectangle [y0:y1, x0:x1) in 4 lookups."""
    t = ii.data
    return float(t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0])


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-d Gaussian, radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    radius = int(math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_blur(plane: FloatPlane, sigma: float) -> FloatPlane:
    """Separable Gaussian blur, kernel radius ceil(3*sigma), replicate padding."""
    k = gaussian_kernel_1d(sigma)
    out = ndimage.convolve1d(plane.data, k, axis=0, mode="nearest")
    out = ndimage.convolve1d(out, k, axis=1, mode="nearest")
    return FloatPlane.from_array(out)


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


def sobel_gradients(plane: FloatPlane) -> tuple[np.ndarray, np.ndarray]:
    """Sobel gradient pair (gx, gy) with replicate padding."""
    gx = ndimage.convolve(plane.data, _SOBEL_X, mode="nearest")
    gy = ndimage.convolve(plane.data, _SOBEL_Y, mode="nearest")
    return gx, gy


def canny_edges(plane: FloatPlane, low: float, high: float) -> np.ndarray:
    """Canny edge mask: Sobel -> non-maximum suppression -> hysteresis.

    `low` and `high` are fractions of the maximum gradient magnitude,
    0 < low < high <= 1.  Returns a boolean (height, width) mask.
    """
    if not (0.0 < low < high <= 1.0):
        raise ValueError("thresholds must satisfy 0 < low < high <= 1")
    gx, gy = sobel_gradients(plane)
    mag = np.hypot(gx, gy)
    mmax = mag.max()
    if mmax <= 1e-12:
        return np.zeros((plane.height, plane.width), dtype=bool)

    # Non-maximum suppression over 4 quantized directions.  Ties along the
    # gradient keep exactly one pixel (strict > toward +direction).
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = ((angle + np.pi / 8) // (np.pi / 4)).astype(int) % 4
    offsets = {0: (0, 1), 1: (-1, 1), 2: (-1, 0), 3: (-1, -1)}
    padded = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    ys, xs = np.mgrid[0:h, 0:w]
    n_fwd = np.empty_like(mag)
    n_bwd = np.empty_like(mag)
    for s, (dy, dx) in offsets.items():
        sel = sector == s
        n_fwd[sel] = padded[ys[sel] + 1 + dy, xs[sel] + 1 + dx]
        n_bwd[sel] = padded[ys[sel] + 1 - dy, xs[sel] + 1 - dx]
    keep = (mag > n_fwd) & (mag >= n_bwd)

    low_thr = low * mmax
    high_thr = high * mmax
    weak = keep & (mag >= low_thr)
    strong = keep & (mag >= high_thr)
    if not strong.any():
        return np.zeros_like(weak)
    # Hysteresis: keep weak components (8-connected) that touch a strong pixel.
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return np.zeros_like(weak)
    strong_labels = np.unique(labels[strong])
    strong_labels = strong_labels[strong_labels > 0]
    return np.isin(labels, strong_labels)


def _resize_plane(data: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Bilinear resample of a 2-d or 3-d array (pixel-center alignment)."""
    h, w = data.shape[:2]
    sy = h / new_h
    sx = w / new_w
    ys = (np.arange(new_h) + 0.5) * sy - 0.5
    xs = (np.arange(new_w) + 0.5) * sx - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)
    wx = np.clip(xs - x0, 0.0, 1.0)
    if data.ndim == 3:
        wy = wy[:, None, None]
        wx = wx[None, :, None]
    else:
        wy = wy[:, None]
        wx = wx[None, :]
    d = data.astype(np.float64)
    top = d[y0][:, x0] * (1 - wx) + d[y0][:, x1] * wx
    bot = d[y1][:, x0] * (1 - wx) + d[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def resize_bilinear(img: ImageBuffer, max_side: int) -> ImageBuffer:
    """Downscale so the longest side equals `max_side`, preserving aspect ratio.

    Images already within the bound are returned unchanged.
    """
    if max_side < 16:
        raise ValueError("max_side must be >= 16")
    longest = max(img.width, img.height)
    if longest <= max_side:
        return img
    scale = max_side / longest
    new_w = max(1, round(img.width * scale))
    new_h = max(1, round(img.height * scale))
    if img.width >= img.height:
        new_w = max_side
    else:
        new_h = max_side
    out = _resize_plane(img.data, new_h, new_w)
    return ImageBuffer.from_array(np.clip(np.rint(out), 0, 255).astype(np.uint8))
