#!/usr/bin/env python3
"""Generate the bundled 20-project mini dataset.

Self-contained directory consumed by the offline end-to-end pipeline tests:
synthetic listing records (JSONL), deterministic synthetic title images,
fixture annotations keyed by image content hash, copies of the starter
dictionaries, and a pipeline config with desk-scale model settings.

Writes src/fundlens/assets/mini/.  Rerun to regenerate.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from fundlens.imaging.core import FloatPlane, ImageBuffer, gaussian_blur
from fundlens.imaging.io import save_png

ASSETS = Path(__file__).resolve().parents[1] / "src" / "fundlens" / "assets"
MINI = ASSETS / "mini"

N_PROJECTS = 20
IMG_SIZE = 96

COUNTRIES = ["US", "US", "US", "US", "US", "GB", "GB", "CA", "DE", "AU"]

BLURBS = [
    "The best smart mug ever made",
    "An innovative take on home brewing",
    "Finest leather goods, built to last",
    "A revolutionary pocket drone for creators",
    "Simple tools for happy gardeners",
    "The greatest card game of the decade",
    "Groundbreaking modular synthesizer kit",
    "A cozy blanket for cold studios",
]

TEXT_SNIPPETS = [
    "We spent two years perfecting every detail and we are proud of the result.",
    "Some reviewers were mad about shipping delays but we fixed the process.",
    "Nothing is more frustrating than cables that tangle, so we removed them.",
    "Our team loves building things that people actually use every day.",
    "I hate flimsy products, which is why the frame is machined aluminum.",
]


def render_image(rng, kind):
    if kind == 0:  # smooth color gradient
        g = np.linspace(0, 1, IMG_SIZE)
        base = np.outer(g, g)
        rgb = np.stack(
            [base * rng.integers(120, 255),
             base[::-1] * rng.integers(120, 255),
             np.full_like(base, rng.integers(0, 120))],
            axis=-1,
        )
        return np.clip(rgb, 0, 255)
    if kind == 1:  # product-like blob on plain ground
        img = np.full((IMG_SIZE, IMG_SIZE, 3), rng.integers(150, 230), dtype=float)
        y, x = rng.integers(24, 60, 2)
        s = int(rng.integers(20, 36))
        color = rng.integers(10, 200, 3)
        img[y : y + s, x : x + s] = color
        noise = rng.normal(0, 4, img.shape)
        return np.clip(img + noise, 0, 255)
    if kind == 2:  # textured noise field, smoothed
        plane = rng.random((IMG_SIZE, IMG_SIZE))
        smooth = gaussian_blur(FloatPlane.from_array(plane), 2.0).data
        smooth = (smooth - smooth.min()) / max(np.ptp(smooth), 1e-9)
        rgb = np.stack([smooth * 255, smooth[::-1] * 200, smooth.T * 220], axis=-1)
        return np.clip(rgb, 0, 255)
    # split composition: two color fields
    img = np.zeros((IMG_SIZE, IMG_SIZE, 3))
    img[:, : IMG_SIZE // 2] = rng.integers(0, 255, 3)
    img[:, IMG_SIZE // 2 :] = rng.integers(0, 255, 3)
    return np.clip(img + rng.normal(0, 3, img.shape), 0, 255)


LABEL_POOL = [
    ("gadget", 0.97), ("table", 0.88), ("kitchen appliance", 0.74),
    ("drone", 0.93), ("textile", 0.66), ("tool", 0.81), ("toy", 0.58),
    ("electronics", 0.86), ("furniture", 0.49), ("packaging", 0.41),
    ("musical instrument", 0.9), ("plant", 0.52),
]


def main() -> None:
    rng = np.random.default_rng(240817)
    if MINI.exists():
        shutil.rmtree(MINI)
    (MINI / "images").mkdir(parents=True)
    (MINI / "dictionaries").mkdir()
    for name in ("anger.txt", "blurb_best.txt", "blurb_innovate.txt"):
        shutil.copyfile(ASSETS / "dictionaries" / name, MINI / "dictionaries" / name)

    annotations = {}
    rows = []
    for i in range(N_PROJECTS):
        pid = f"mini{i:03d}"
        img_name = f"img_{i:02d}.png"
        if i == 7:  # one listing has no title image at all
            img_name = None
        elif i == 4:  # one listing reuses the face fixture
            shutil.copyfile(
                ASSETS / "fixtures" / "face_scene.png", MINI / "images" / img_name
            )
        else:
            arr = render_image(rng, i % 4).astype(np.uint8)
            save_png(ImageBuffer.from_array(arr), MINI / "images" / img_name)

        if img_name is not None and i != 9:  # one image stays unannotated
            data = (MINI / "images" / img_name).read_bytes()
            count = int(rng.integers(2, 6))
            picks = rng.choice(len(LABEL_POOL), size=count, replace=False)
            annotations[hashlib.sha256(data).hexdigest()] = [
                {"label": LABEL_POOL[j][0], "confidence": LABEL_POOL[j][1]}
                for j in sorted(picks)
            ]

        goal = float(rng.integers(5, 500)) * 100.0
        success = rng.random() < 0.35
        pledged = goal * float(rng.uniform(1.0, 3.0)) if success else goal * float(
            rng.uniform(0.0, 0.6)
        )
        n_imgs = int(rng.integers(0, 9))
        n_vids = int(rng.integers(0, 3))
        html = "<p>story</p>" + "<img src='x.jpg'>" * n_imgs
        html += "<video controls></video>" * n_vids
        if i == 3:
            html += "<!-- <img src='hidden.png'> -->"
        launched_day = int(rng.integers(0, 364))
        year = int(rng.integers(2012, 2018))
        duration = int(rng.integers(20, 60))
        month = launched_day // 31 + 1
        day = launched_day % 28 + 1
        launched = datetime(year, month, day, 12, tzinfo=timezone.utc)
        rows.append({
            "id": pid,
            "goal_usd": goal,
            "pledged_usd": round(pledged, 2),
            "staff_pick": bool(rng.random() < 0.2),
            "country": COUNTRIES[int(rng.integers(0, len(COUNTRIES)))],
            "launched_at": launched.isoformat(),
            "deadline": (launched + timedelta(days=duration)).isoformat(),
            "blurb": BLURBS[int(rng.integers(0, len(BLURBS)))],
            "full_text": " ".join(
                TEXT_SNIPPETS[int(rng.integers(0, len(TEXT_SNIPPETS)))]
                for _ in range(3)
            ),
            "description_html": html,
            "image_url": img_name,
        })

    with open(MINI / "projects.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    (MINI / "annotations.json").write_text(
        json.dumps(annotations, indent=2, sort_keys=True) + "\n"
    )

    config = {
        "input": {"path": "projects.jsonl", "format": "jsonl"},
        "images": {"source": "local", "dir": "images", "max_side": 96},
        "annotation": {
            "providers": ["fixture"],
            "fixture_path": "annotations.json",
            "tau": {"fixture": 0.5},
        },
        "text": {
            "fulltext_dictionaries": ["dictionaries/anger.txt"],
            "blurb_dictionaries": [
                "dictionaries/blurb_best.txt",
                "dictionaries/blurb_innovate.txt",
            ],
        },
        "extraction": {"max_side": 96},
        "models": {
            "train_fraction": 0.8,
            "cv_folds": 4,
            "impute_k": 3,
            "sets": [1, 2, 3, 4, 5],
            "learners": ["ridge", "lasso", "gbt", "bart"],
            "ridge_lambdas": 12,
            "lasso_lambdas": 12,
            "gbt": {"eta_grid": [0.3], "max_depth_grid": [2], "n_rounds": 60,
                    "early_stopping_rounds": 10},
            "bart": {"m": 10, "n_burn": 25, "n_post": 40},
        },
        "interpret": {"n_replicates": 3, "pdp_variables": ["n_images", "n_videos"]},
        "cache_dir": "cache",
        "output_dir": "out",
        "seed": 7,
    }
    (MINI / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    print(f"wrote {MINI} ({N_PROJECTS} projects, {len(annotations)} annotated images)")


if __name__ == "__main__":
    main()
