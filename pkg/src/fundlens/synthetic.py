"""Synthetic data generators for benchmarks and acceptance checks."""

from __future__ import annotations

import numpy as np

from .table import FeatureTable


def friedman1(n: int, noise_sd: float = 1.0, seed: int = 0):
    """Friedman #1: y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 + eps,
    with 5 signal and 5 pure-noise uniform predictors."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 10))
    y = (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
        + rng.normal(0.0, noise_sd, n)
    )
    return X, y


def synthetic_projects_table(n: int = 2000, seed: int = 0,
                             n_text: int = 6, n_detail: int = 8) -> FeatureTable:
    """A crowdfunding-shaped table where log dollars depends nonlinearly on
    the two visual counts; baseline, text, and image-detail columns are noise.

    Mirrors the layout the extraction pipeline produces: tagged baseline,
    visual_count, text, and image_detail columns plus the log-dollar outcome.
    """
    rng = np.random.default_rng(seed)
    n_images = rng.poisson(4.0, n).astype(float)
    n_videos = rng.integers(0, 4, n).astype(float)

    baseline = {
        "staff_pick": (rng.random(n) < 0.12).astype(float),
        "log_goal": rng.normal(8.5, 1.2, n),
        "duration_days": rng.integers(15, 61, n).astype(float),
        "day_of_year": rng.integers(1, 367, n).astype(float),
        "year": rng.integers(2009, 2018, n).astype(float),
        "country_US": (rng.random(n) < 0.7).astype(float),
    }
    text = {f"text_noise_{i}": rng.normal(0, 1, n) for i in range(n_text)}
    detail = {f"detail_noise_{i}": rng.normal(0, 1, n) for i in range(n_detail)}

    # diminishing returns in images, a jump from zero to one video
    signal = 1.6 * np.log1p(n_images) + 1.2 * (n_videos >= 1) + 0.3 * np.minimum(n_videos, 2)
    y = 2.0 + signal + rng.normal(0.0, 0.8, n)

    columns, tags, cols = [], {}, []
    for name, vals in baseline.items():
        columns.append(name)
        tags[name] = "baseline"
        cols.append(vals)
    for name, vals in (("n_images", n_images), ("n_videos", n_videos)):
        columns.append(name)
        tags[name] = "visual_count"
        cols.append(vals)
    for name, vals in text.items():
        columns.append(name)
        tags[name] = "text"
        cols.append(vals)
    for name, vals in detail.items():
        columns.append(name)
        tags[name] = "image_detail"
        cols.append(vals)

    return FeatureTable(
        ids=[f"s{i}" for i in range(n)],
        columns=columns,
        values=np.column_stack(cols),
        outcome=y,
        tags=tags,
        categories=dict(tags),
    )


def additive_model_data(n: int = 600, seed: int = 0):
    """Two-component additive model for PDP recovery checks:
    y = g1(x1) + g2(x2) + eps with known g1, g2."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 4))

    def g1(x):
        return np.sin(2.0 * np.pi * x)

    def g2(x):
        return 3.0 * (x - 0.5) ** 2

    y = g1(X[:, 0]) + g2(X[:, 1]) + rng.normal(0, 0.1, n)
    return X, y, g1, g2
