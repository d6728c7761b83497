#!/usr/bin/env python3
"""Fit the bundled quality scoring model.

Generates smooth synthetic scenes, computes MSCN features for each scene
pristine and with additive Gaussian pixel noise (sigma 10/25/40), then fits a
ridge regression separating the two groups (pristine = 1, noisy = 0, noise
level damping the target).  Standardization is folded into the saved weights
so the model file applies directly to raw feature vectors.

Writes src/fundlens/assets/quality_model.txt.  Rerun to regenerate.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from fundlens.imaging.core import FloatPlane, ImageBuffer, gaussian_blur
from fundlens.imaging.quality import QUALITY_FEATURE_COUNT, quality_features

OUT = Path(__file__).resolve().parents[1] / "src" / "fundlens" / "assets" / "quality_model.txt"

N_SCENES = 60
SIZE = 96
NOISE_LEVELS = (10.0, 25.0, 40.0)
RIDGE_LAMBDA = 1.0


def random_scene(rng: np.random.Generator) -> np.ndarray:
    """Smooth low-frequency grayscale scene with a few hard shapes."""
    base = gaussian_blur(FloatPlane.from_array(rng.random((SIZE, SIZE))), 6.0).data
    base = (base - base.min()) / max(np.ptp(base), 1e-9)
    img = 40 + 175 * base
    for _ in range(rng.integers(1, 4)):
        y, x = rng.integers(8, SIZE - 24, size=2)
        s = int(rng.integers(8, 20))
        img[y : y + s, x : x + s] = rng.integers(20, 235)
    return np.clip(img, 0, 255)


def add_noise(img: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    return np.clip(img + rng.normal(0.0, sigma, img.shape), 0, 255)


def main() -> None:
    rng = np.random.default_rng(20240501)
    feats, targets = [], []
    for _ in range(N_SCENES):
        scene = random_scene(rng)
        f = quality_features(ImageBuffer.from_array(scene.astype(np.uint8)))
        feats.append(f)
        targets.append(1.0)
        for sigma in NOISE_LEVELS:
            noisy = add_noise(scene, sigma, rng)
            feats.append(quality_features(ImageBuffer.from_array(noisy.astype(np.uint8))))
            targets.append(max(0.0, 1.0 - sigma / 40.0))

    X = np.asarray(feats)
    y = np.asarray(targets)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (X - mu) / sd
    p = Z.shape[1]
    beta = np.linalg.solve(Z.T @ Z + RIDGE_LAMBDA * np.eye(p), Z.T @ (y - y.mean()))

    # fold standardization into raw-feature weights
    w = beta / sd
    intercept = float(y.mean() - mu @ w)

    lines = [
        "# fundlens quality model: linear score over 36 MSCN statistics",
        "# higher = better quality; fit on synthetic pristine-vs-noisy scenes",
        str(QUALITY_FEATURE_COUNT),
        repr(intercept),
    ]
    lines += [repr(float(v)) for v in w]
    OUT.write_text("\n".join(lines) + "\n")

    scores = intercept + X @ w
    pristine = scores[y == 1.0]
    worst_noisy = scores[y < 1.0].max()
    print(f"wrote {OUT}")
    print(f"pristine score range: [{pristine.min():.4f}, {pristine.max():.4f}]")
    print(f"max noisy score: {worst_noisy:.4f}")


if __name__ == "__main__":
    main()
