"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; the suite is self-contained and offline.
"""

import json
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from fundlens.assets import face_cascade_path, mini_dataset_dir
from fundlens.imaging.composition import otsu_threshold
from fundlens.imaging.core import ImageBuffer
from fundlens.imaging.faces import detect_faces, load_cascade
from fundlens.imaging.figure_ground import segment_figure_ground
from fundlens.imaging.io import load_image
from fundlens.interpret import (
    null_importance_test,
    partial_dependence,
    pdp_grid,
)
from fundlens.models import (
    BARTParams,
    GBTParams,
    evaluate,
    fit_bart,
    fit_gbt,
    fit_lasso,
    fit_ridge,
    lasso_kkt_residuals,
    lasso_lambda_max,
    cross_validate,
)
from fundlens.synthetic import additive_model_data, friedman1, synthetic_projects_table
from fundlens.table import FeatureTable, split


def _print_pass(number, detail):
    print(f"ACCEPTANCE {number:02d} PASS: {detail}")


def test_criterion_01_feature_extraction_invariant_suite():
    """Every TRIVIAL/DERIVED example across the visual feature modules passes
    and the suite finishes under 60 seconds."""
    import pathlib

    tests = [
        "test_color_features.py",
        "test_quality.py",
        "test_composition.py",
        "test_figure_ground.py",
        "test_faces.py",
        "test_annotations.py",
    ]
    here = pathlib.Path(__file__).parent
    start = time.monotonic()
    result = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", *[str(here / t) for t in tests]],
        capture_output=True, text=True, cwd=here.parent,
    )
    elapsed = time.monotonic() - start
    assert result.returncode == 0, result.stdout + result.stderr
    assert elapsed < 60.0, f"suite took {elapsed:.1f}s"
    _print_pass(1, f"visual feature example suite green in {elapsed:.1f}s")


def test_criterion_02_otsu_exact_oracle():
    def brute_force(hist):
        total = hist.sum()
        best_level, best_var = 0, -1.0
        for t in range(256):
            w0 = hist[: t + 1].sum()
            w1 = total - w0
            if w0 == 0 or w1 == 0:
                var = -1.0
            else:
                mu0 = (hist[: t + 1] * np.arange(t + 1)).sum() / w0
                mu1 = (hist[t + 1 :] * np.arange(t + 1, 256)).sum() / w1
                var = (w0 / total) * (w1 / total) * (mu0 - mu1) ** 2
            if var > best_var:
                best_var, best_level = var, t
        return best_level

    rng = np.random.default_rng(2024)
    for _ in range(1000):
        hist = rng.integers(0, 60, size=256).astype(np.float64)
        if (hist > 0).sum() < 2:
            hist[5] = 1.0
            hist[250] = 1.0
        assert otsu_threshold(hist).level == brute_force(hist)
    _print_pass(2, "exact agreement with exhaustive search on 1000 histograms")


def test_criterion_03_figure_ground_iou_margin_sweep(monkeypatch):
    import fundlens.imaging.figure_ground as fgmod

    field, square = 96, 32
    img = np.zeros((field, field, 3), dtype=np.uint8)
    lo = (field - square) // 2
    img[lo : lo + square, lo : lo + square] = 255
    truth = np.zeros((field, field), dtype=bool)
    truth[lo : lo + square, lo : lo + square] = True
    buf = ImageBuffer.from_array(img)
    worst = 1.0
    for margin in (0.03, 0.05, 0.07, 0.10):
        monkeypatch.setattr(fgmod, "BORDER_FRACTION", margin)
        result = segment_figure_ground(buf)
        assert result.converged
        inter = np.logical_and(result.mask, truth).sum()
        union = np.logical_or(result.mask, truth).sum()
        iou = inter / union
        worst = min(worst, iou)
        assert iou >= 0.9, f"margin {margin}: IoU {iou:.3f}"
    _print_pass(3, f"centered-square IoU >= 0.9 for margins 3-10% (worst {worst:.3f})")


def test_criterion_04_face_detection_fixtures():
    cascade = load_cascade(face_cascade_path())
    fixtures = face_cascade_path().parent / "fixtures"
    scene = load_image(fixtures / "face_scene.png")
    truth = json.loads((fixtures / "face_scene.json").read_text())["face_box"]

    det = detect_faces(scene, cascade)
    assert det.count == 1
    bx, by, bw, bh = det.boxes[0]
    tx, ty, tw, th = truth
    ix = max(0.0, min(bx + bw, tx + tw) - max(bx, tx))
    iy = max(0.0, min(by + bh, ty + th) - max(by, ty))
    iou = ix * iy / (bw * bh + tw * th - ix * iy)
    assert iou >= 0.5

    flat = ImageBuffer.from_array(np.full((96, 96, 3), 128, dtype=np.uint8))
    assert detect_faces(flat, cascade).count == 0
    rotated = ImageBuffer.from_array(np.rot90(scene.data).copy())
    assert detect_faces(rotated, cascade).count == 0
    _print_pass(4, f"1 fixture face (IoU {iou:.2f}), 0 on flat and rotated")


def test_criterion_05_linear_model_oracles():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.normal(0, 1, (100, 5))
        y = X @ rng.normal(0, 2, 5) + rng.normal(0, 0.5, 100)
        model = fit_ridge(X, y, 0.0)
        A = np.column_stack([np.ones(100), X])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        oracle_pred = A @ coef
        assert np.max(np.abs(model.predict(X) - oracle_pred)) < 1e-8

    worst_kkt = 0.0
    for seed in (100, 101, 102):
        rng = np.random.default_rng(seed)
        X = rng.normal(0, 1, (120, 8))
        y = X[:, :3] @ np.array([2.0, -1.0, 0.5]) + rng.normal(0, 0.4, 120)
        lam_max = lasso_lambda_max(X, y)
        grid = [{"lam": f * lam_max} for f in np.logspace(-3, 0, 25)]
        cv = cross_validate(
            lambda XX, yy, p: fit_lasso(XX, yy, p["lam"]), X, y, grid,
            folds=10, seed=seed,
        )
        model = fit_lasso(X, y, cv.best_params["lam"])
        worst_kkt = max(worst_kkt, float(np.max(lasso_kkt_residuals(X, y, model))))
    assert worst_kkt <= 1e-6
    _print_pass(5, f"ridge matches OLS oracle (20 seeds); lasso KKT <= {worst_kkt:.1e}")


def test_criterion_06_gbt_monotone_and_exact_step():
    rng = np.random.default_rng(7)
    X = rng.normal(0, 1, (150, 4))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2 + rng.normal(0, 0.3, 150)
    model = fit_gbt(X, y, GBTParams(eta=0.3, max_depth=3, n_rounds=80, subsample=1.0))
    r = model.train_rmse_per_round
    assert all(a >= b - 1e-12 for a, b in zip(r, r[1:]))

    Xs = np.linspace(0, 1, 50).reshape(-1, 1)
    ys = (Xs[:, 0] >= 0.4) * 2.0
    step = fit_gbt(Xs, ys, GBTParams(eta=1.0, max_depth=1, n_rounds=1, reg_lambda=0.0))
    assert step.train_rmse_per_round[-1] == pytest.approx(0.0, abs=1e-12)
    _print_pass(6, "training RMSE nonincreasing; 1-split step fit exactly in 1 round")


def test_criterion_07_bart_friedman_benchmark():
    X, y = friedman1(500, seed=42)
    train, test = np.arange(400), np.arange(400, 500)
    start = time.monotonic()
    model = fit_bart(
        X[train], y[train], BARTParams(m=50, n_burn=250, n_post=500), seed=1
    )
    elapsed = time.monotonic() - start
    assert elapsed < 300.0, f"BART fit took {elapsed:.0f}s"
    bart_rmse = float(np.sqrt(np.mean((model.predict(X[test]) - y[test]) ** 2)))

    lam_max = lasso_lambda_max(X[train], y[train])
    grid = [{"lam": f * lam_max} for f in np.logspace(-4, 0, 30)]
    cv = cross_validate(
        lambda XX, yy, p: fit_lasso(XX, yy, p["lam"]),
        X[train], y[train], grid, folds=10, seed=0,
    )
    lasso = fit_lasso(X[train], y[train], cv.best_params["lam"])
    lasso_rmse = float(np.sqrt(np.mean((lasso.predict(X[test]) - y[test]) ** 2)))
    assert bart_rmse < lasso_rmse

    prop = model.split_counts.sum(axis=0).astype(float)
    prop /= prop.sum()
    assert prop[:5].min() > prop[5:].max()
    _print_pass(
        7,
        f"BART {bart_rmse:.2f} < lasso {lasso_rmse:.2f}; signal proportions "
        f"dominate noise; fit in {elapsed:.0f}s",
    )


def test_criterion_08_synthetic_visual_count_echo():
    table = synthetic_projects_table(n=2000, seed=13)
    train, test = split(table, 0.8, seed=5)
    rmse = {}
    for set_id in (1, 3, 5):
        tr = train.select_set(set_id)
        te = test.select_set(set_id)
        gbt = fit_gbt(tr.values, tr.outcome,
                      GBTParams(eta=0.1, max_depth=3, n_rounds=200, seed=1))
        rmse[("gbt", set_id)] = evaluate(
            te.outcome, gbt.predict(te.values), "out-of-sample", set_id
        ).rmse
        bart = fit_bart(tr.values, tr.outcome,
                        BARTParams(m=50, n_burn=200, n_post=300), seed=2)
        rmse[("bart", set_id)] = evaluate(
            te.outcome, bart.predict(te.values), "out-of-sample", set_id
        ).rmse
    for learner in ("gbt", "bart"):
        improvement = 1.0 - rmse[(learner, 3)] / rmse[(learner, 1)]
        assert improvement >= 0.15, f"{learner}: {improvement:.1%}"
        assert rmse[(learner, 5)] <= rmse[(learner, 3)], (
            f"{learner}: set5 {rmse[(learner, 5)]:.4f} > set3 {rmse[(learner, 3)]:.4f}"
        )
    _print_pass(
        8,
        "visual counts cut out-of-sample RMSE by "
        f"{1 - rmse[('gbt', 3)] / rmse[('gbt', 1)]:.0%} (GBT) / "
        f"{1 - rmse[('bart', 3)] / rmse[('bart', 1)]:.0%} (BART); all-variables "
        "set predicts best",
    )


def test_criterion_09_pdp_additive_recovery():
    X, y, g1, _ = additive_model_data(n=500, seed=8)
    grid = pdp_grid(X[:, 0])
    assert len(grid) == 5
    model = fit_bart(X, y, BARTParams(m=40, n_burn=150, n_post=200), seed=4)
    curve = partial_dependence(model, X, 0)
    assert len(curve.grid) == 5
    corr = float(np.corrcoef(curve.effects, g1(curve.grid))[0, 1])
    assert corr >= 0.95
    _print_pass(9, f"PDP-truth correlation {corr:.3f}; quintile grid has 5 points")


def test_criterion_10_null_importance_fractions():
    rng = np.random.default_rng(3)
    n = 250
    X = rng.normal(0, 1, (n, 4))
    y = X[:, 0] + rng.normal(0, 0.5, n)
    cols = ["signal", "noise1", "noise2", "noise3"]
    t = FeatureTable(
        ids=[f"r{i}" for i in range(n)], columns=cols, values=X, outcome=y,
        tags={c: "baseline" for c in cols}, categories={c: "baseline" for c in cols},
    )
    k = int(0.8 * n)
    train = t.select_rows(np.arange(k))
    test = t.select_rows(np.arange(k, n))
    frac_signal = null_importance_test(
        train, test, ["signal"], n_resamples=100, learner="gbt", seed=41
    )
    frac_noise = null_importance_test(
        train, test, ["noise1"], n_resamples=100, learner="gbt", seed=42
    )
    assert frac_signal >= 0.95
    assert 0.2 <= frac_noise <= 0.8
    _print_pass(
        10, f"signal removal fraction {frac_signal:.2f}; noise {frac_noise:.2f}"
    )


@pytest.mark.slow
def test_criterion_11_end_to_end_determinism(tmp_path):
    commands = ["ingest", "fetch-images", "annotate", "extract", "train",
                "importance", "pdp", "report"]
    run_dirs = []
    for name in ("run1", "run2"):
        dest = tmp_path / name
        shutil.copytree(mini_dataset_dir(), dest)
        for cmd in commands:
            result = subprocess.run(
                [sys.executable, "-m", "fundlens.cli", cmd, "--config", "config.json"],
                cwd=dest, capture_output=True, text=True,
            )
            assert result.returncode == 0, f"{name} {cmd}: {result.stderr}"
        run_dirs.append(dest)

    compared = 0
    r1, r2 = run_dirs
    files1 = sorted(p.relative_to(r1) for p in (r1 / "out").rglob("*") if p.is_file())
    files2 = sorted(p.relative_to(r2) for p in (r2 / "out").rglob("*") if p.is_file())
    assert files1 == files2
    for rel in files1:
        assert (r1 / rel).read_bytes() == (r2 / rel).read_bytes(), f"differs: {rel}"
        compared += 1
    assert any("features.csv" in str(f) for f in files1)
    assert any(str(f).startswith("out/models/") for f in files1)
    assert any("report.md" in str(f) for f in files1)
    _print_pass(11, f"two offline runs byte-identical across {compared} output files")
