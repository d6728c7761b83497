"""No-reference quality features: MSCN coefficients at two scales with
generalized-Gaussian fits, plus a loadable linear scoring model.

The feature vector follows the classic no-reference IQA design: per scale,
a symmetric GGD fit (shape, variance) of the MSCN field and an asymmetric
GGD fit (shape, mean, left variance, right variance) of four pairwise-product
neighborhoods, 18 numbers per scale, 36 total.

Scoring is a plain linear model loaded from a text file (see
``load_quality_model``); the bundled model was fit offline so that pristine
fixtures outscore their noise-corrupted versions.  Weights apply to the raw
feature vector; any standardization is folded into the weights at training
time.  Higher score = better quality.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gamma as gamma_fn

from ..errors import ConfigError
from .core import ImageBuffer, to_grayscale

QUALITY_FEATURE_COUNT = 36

MSCN_C = 1.0 / 255.0  # stabilizer in (I - mu) / (sigma + C) on [0,1] planes
SIGMA_FLOOR = 1e-6

_WINDOW = 7
_WINDOW_SIGMA = 7.0 / 6.0

# moment-ratio lookup shared by the GGD/AGGD fits
_GAM_GRID = np.arange(0.2, 10.001, 0.001)
_R_GGD = gamma_fn(1.0 / _GAM_GRID) * gamma_fn(3.0 / _GAM_GRID) / gamma_fn(2.0 / _GAM_GRID) ** 2
_R_AGGD = 1.0 / _R_GGD  # Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma**2))
    return k / k.sum()


_WIN1D = _gaussian_window(_WINDOW, _WINDOW_SIGMA)


def _local_stats(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    from scipy.ndimage import convolve1d

    def smooth(x):
        return convolve1d(convolve1d(x, _WIN1D, axis=0, mode="nearest"), _WIN1D, axis=1, mode="nearest")

    mu = smooth(plane)
    var = smooth(plane * plane) - mu * mu
    sigma = np.sqrt(np.maximum(var, 0.0))
    return mu, sigma


def mscn_coefficients(plane: np.ndarray) -> np.ndarray:
    """Mean-subtracted contrast-normalized field of a [0,1] grayscale plane."""
    mu, sigma = _local_stats(plane)
    return (plane - mu) / (sigma + MSCN_C)


def _fit_ggd(x: np.ndarray) -> tuple[float, float]:
    """Moment-matched symmetric GGD fit -> (shape, variance)."""
    m2 = float(np.mean(x * x))
    mu_abs = max(float(np.mean(np.abs(x))), SIGMA_FLOOR)
    rho = max(m2, SIGMA_FLOOR**2) / mu_abs**2
    alpha = float(_GAM_GRID[np.argmin(np.abs(rho - _R_GGD))])
    return alpha, m2


def _fit_aggd(x: np.ndarray) -> tuple[float, float, float, float]:
    """Moment-matched asymmetric GGD fit -> (shape, mean, left var, right var)."""
    left = x[x < 0]
    right = x[x >= 0]
    sigma_l = np.sqrt(np.mean(left**2)) if left.size else SIGMA_FLOOR
    sigma_r = np.sqrt(np.mean(right**2)) if right.size else SIGMA_FLOOR
    sigma_l = max(float(sigma_l), SIGMA_FLOOR)
    sigma_r = max(float(sigma_r), SIGMA_FLOOR)
    gamma_hat = sigma_l / sigma_r
    m1 = max(float(np.mean(np.abs(x))), SIGMA_FLOOR)
    m2 = max(float(np.mean(x * x)), SIGMA_FLOOR**2)
    r_hat = m1 * m1 / m2
    R_hat = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    alpha = float(_GAM_GRID[np.argmin(np.abs(R_hat - _R_AGGD))])
    mean = (sigma_r - sigma_l) * gamma_fn(2.0 / alpha) / gamma_fn(1.0 / alpha)
    return alpha, float(mean), sigma_l**2, sigma_r**2


def _scale_features(plane: np.ndarray) -> list[float]:
    m = mscn_coefficients(plane)
    feats = list(_fit_ggd(m))
    pairs = (
        m[:, :-1] * m[:, 1:],  # horizontal
        m[:-1, :] * m[1:, :],  # vertical
        m[:-1, :-1] * m[1:, 1:],  # main diagonal
        m[:-1, 1:] * m[1:, :-1],  # anti diagonal
    )
    for p in pairs:
        feats.extend(_fit_aggd(p.ravel()))
    return feats


def _downsample2(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    h2, w2 = h - h % 2, w - w % 2
    p = plane[:h2, :w2]
    return 0.25 * (p[0::2, 0::2] + p[0::2, 1::2] + p[1::2, 0::2] + p[1::2, 1::2])


def quality_features(img: ImageBuffer) -> np.ndarray | None:
    """36-element MSCN statistics vector, or None for images below 32x32."""
    if img.width < 32 or img.height < 32:
        return None
    plane = to_grayscale(img).data
    feats = _scale_features(plane)
    feats.extend(_scale_features(_downsample2(plane)))
    return np.asarray(feats, dtype=np.float64)


@dataclass(frozen=True)
class QualityModel:
    intercept: float
    weights: np.ndarray

    def score(self, features: np.ndarray) -> float:
        f = np.asarray(features, dtype=np.float64)
        if f.shape != self.weights.shape:
            raise ConfigError(
                f"quality model expects {self.weights.size} features, got {f.size}"
            )
        return float(self.intercept + self.weights @ f)


def load_quality_model(path) -> QualityModel:
    """Parse a quality model file.

    Format: optional ``#`` comment lines, then one line with the feature
    count, one line with the intercept, then one weight per line.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"quality model file not found at expected path: {p}")
    lines = [
        ln.strip()
        for ln in p.read_text().splitlines()
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    try:
        count = int(lines[0])
        values = [float(v) for v in lines[1:]]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"corrupt quality model file {p}: {exc}") from exc
    if len(values) != count + 1:
        raise ConfigError(
            f"quality model file {p} declares {count} features "
            f"but carries {len(values) - 1} weights"
        )
    return QualityModel(intercept=values[0], weights=np.asarray(values[1:]))


def quality_score(features: np.ndarray, model_file) -> float:
    """Linear quality score of a feature vector under a model file or QualityModel."""
    model = model_file if isinstance(model_file, QualityModel) else load_quality_model(model_file)
    return model.score(features)
