"""Color-category image details: brightness, saturation, colorfulness,
contrast, warm hue, clarity, and the Laplacian blur metric.

All statistics use the population standard deviation so single-pixel images
are well defined.  Bounded outputs live in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FloatPlane, ImageBuffer, convolve2d, rgb_to_hsv, to_grayscale

# sigma(R-G) and sigma((R+G)/2 - B) are each bounded by 255
COLORFULNESS_NORM = 510.0

WARM_HUE_LOW = 70.0  # degrees; warm band is [0, 70] plus [330, 360)
WARM_HUE_HIGH = 330.0

CLARITY_V_CUTOFF = 0.7

LAPLACIAN_4 = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class ColorFeatures:
    brightness: float
    saturation: float
    colorfulness: float
    contrast: float
    warm_hue: float
    clarity: float
    blur_metric: float
    quality_score: float | None  # None when the quality model is not loaded


def brightness(img: ImageBuffer) -> float:
    """Mean of the HSV V plane."""
    _, _, v = rgb_to_hsv(img)
    return float(v.data.mean())


def saturation(img: ImageBuffer) -> float:
    """Mean of the HSV S plane."""
    _, s, _ = rgb_to_hsv(img)
    return float(s.data.mean())


def colorfulness(img: ImageBuffer) -> float:
    """(sigma(R-G) + sigma((R+G)/2 - B)) / 510, population sigma on 0..255 scale."""
    rgb = img.data.astype(np.float64)
    rg = rgb[:, :, 0] - rgb[:, :, 1]
    yb = (rgb[:, :, 0] + rgb[:, :, 1]) / 2.0 - rgb[:, :, 2]
    return float((rg.std() + yb.std()) / COLORFULNESS_NORM)


def contrast(img: ImageBuffer) -> float:
    """Population standard deviation of the V plane."""
    _, _, v = rgb_to_hsv(img)
    return float(v.data.std())


def warm_hue(img: ImageBuffer) -> float:
    """Fraction of chromatic pixels with H in [0, 70] or [330, 360) degrees.

    Achromatic pixels (S == 0) never count as warm.
    """
    h, s, _ = rgb_to_hsv(img)
    warm = (s.data > 0) & ((h.data <= WARM_HUE_LOW) | (h.data >= WARM_HUE_HIGH))
    return float(warm.mean())


def clarity(img: ImageBuffer) -> float:
    """Fraction of pixels with V >= 0.7 (boundary inclusive)."""
    _, _, v = rgb_to_hsv(img)
    return float((v.data >= CLARITY_V_CUTOFF).mean())


def blur_metric(img: ImageBuffer) -> float:
    """Population variance of the 4-neighbor Laplacian of the grayscale plane.

    Larger values mean a sharper image; blur in the perceptual sense falls as
    this number rises.  Emitted raw, not inverted.
    """
    gray = to_grayscale(img) if isinstance(img, ImageBuffer) else img
    lap = convolve2d(gray, LAPLACIAN_4)
    return float(lap.data.var())


def laplacian_variance_plane(plane: FloatPlane) -> float:
    """blur_metric for an already-grayscale plane."""
    lap = convolve2d(plane, LAPLACIAN_4)
    return float(lap.data.var())
