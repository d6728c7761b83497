"""Pipeline stages behind the CLI: ingest, image fetching, annotation,
feature extraction, training, and reports.

Every stage is deterministic given the config seed: caches are content
addressed, outputs are written with sorted keys and repr floats, and all
model fits take explicit seeds, so re-running a warm pipeline is
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import assets
from .annotations import (
    AnnotationCache,
    AzureVisionProvider,
    FixtureProvider,
    GoogleVisionProvider,
    ease_of_concept_identification,
    num_evoked_concepts,
)
from .config import PipelineConfig
from .dataset import (
    ProjectRecord,
    count_visuals,
    country_groups,
    derive_baseline,
    ingest,
)
from .errors import ConfigError, FundlensError
from .extraction import (
    IMAGE_DETAIL_CATEGORIES,
    ExtractionSettings,
    extract_image_details,
)
from .imaging.faces import load_cascade
from .imaging.io import load_image
from .imaging.quality import load_quality_model
from .interpret import inclusion_proportions, partial_dependence
from .models import (
    BARTParams,
    GBTParams,
    cross_validate,
    evaluate,
    fit_bart,
    fit_gbt,
    fit_lasso,
    fit_ridge,
    lasso_lambda_max,
    save_model,
    standardize_apply,
    standardize_fit,
)
from .models.serialize import load_model
from .table import (
    FeatureBlock,
    FeatureTable,
    assemble,
    impute_missing,
    read_table,
    split,
    write_table,
)
from .textscore import parse_dictionary, score_text


def _out(cfg: PipelineConfig) -> Path:
    p = cfg.resolve(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _cache(cfg: PipelineConfig) -> Path:
    p = cfg.resolve(cfg.cache_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ------------------------------------------------------------------ ingest

def stage_ingest(cfg: PipelineConfig):
    """Validate input records; write normalized records + rejects reports."""
    result = ingest(cfg.resolve(cfg.input.path), cfg.input.format)
    out = _out(cfg)
    with open(out / "rejects.jsonl", "w", encoding="utf-8") as fh:
        for rej in result.rejects:
            fh.write(json.dumps({"row": rej.row, "reason": rej.reason}) + "\n")
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for rec in result.records:
            fh.write(json.dumps({
                "id": rec.id,
                "goal_usd": rec.goal_usd,
                "pledged_usd": rec.pledged_usd,
                "staff_pick": rec.staff_pick,
                "country": rec.country,
                "launched_at": rec.launched_at.isoformat(),
                "deadline": rec.deadline.isoformat(),
            }, sort_keys=True) + "\n")
    return result


def _records(cfg: PipelineConfig) -> list[ProjectRecord]:
    return ingest(cfg.resolve(cfg.input.path), cfg.input.format).records


# ------------------------------------------------------------- fetch-images

def _fetch_one(url: str, retries: int) -> bytes:
    last = None
    for _ in range(retries):
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                return resp.read()
        except Exception as exc:  # noqa: BLE001 - retried, then reported
            last = exc
    raise FundlensError(f"failed to fetch {url}: {last}")


def stage_fetch_images(cfg: PipelineConfig) -> dict[str, str]:
    """Populate the content-addressed image cache; returns id -> cache path.

    Records already present in the manifest with an existing file are
    skipped, so interrupted runs resume.
    """
    cache = _cache(cfg)
    img_dir = cache / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = cache / "images_manifest.json"
    manifest = {}
    if manifest_path.is_file():
        manifest = json.loads(manifest_path.read_text())

    records = [r for r in _records(cfg) if r.image_url]
    todo = [
        r for r in records
        if r.id not in manifest or not (cache / manifest[r.id]).is_file()
    ]

    def store(rec_id: str, data: bytes, suffix: str):
        digest = hashlib.sha256(data).hexdigest()
        rel = f"images/{digest}{suffix}"
        path = cache / rel
        if not path.is_file():
            path.write_bytes(data)
        manifest[rec_id] = rel

    if cfg.images.source == "local":
        base = cfg.resolve(cfg.images.dir)
        for rec in todo:
            src = base / rec.image_url
            if not src.is_file():
                continue
            store(rec.id, src.read_bytes(), src.suffix or ".img")
    else:
        def work(rec):
            suffix = Path(rec.image_url.split("?")[0]).suffix or ".img"
            return rec.id, _fetch_one(rec.image_url, cfg.images.retries), suffix

        with ThreadPoolExecutor(max_workers=cfg.images.concurrency) as pool:
            for rec_id, data, suffix in pool.map(work, todo):
                store(rec_id, data, suffix)

    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


# ---------------------------------------------------------------- annotate

def _build_providers(cfg: PipelineConfig):
    providers = []
    for name in cfg.annotation.providers:
        if name == "fixture":
            providers.append(FixtureProvider(cfg.resolve(cfg.annotation.fixture_path)))
        elif name == "google":
            providers.append(GoogleVisionProvider())
        elif name == "azure":
            providers.append(AzureVisionProvider())
    return providers


def stage_annotate(cfg: PipelineConfig):
    """Annotate every cached image with every configured provider."""
    cache_dir = _cache(cfg)
    manifest = stage_fetch_images(cfg)
    providers = _build_providers(cfg)
    cache = AnnotationCache(cache_dir)
    results = {}
    for provider in providers:
        for rec_id in sorted(manifest):
            data = (cache_dir / manifest[rec_id]).read_bytes()
            results[(provider.name, rec_id)] = cache.annotate(provider, data)
    return results


# ----------------------------------------------------------------- extract

def _baseline_block(records: list[ProjectRecord]) -> FeatureBlock:
    groups = country_groups(records)
    rows = {}
    any_pooled = any(r.country not in groups for r in records)
    country_cols = [f"country_{g}" for g in groups]
    if any_pooled:
        country_cols.append("country_other")
    for rec in records:
        feats = derive_baseline(rec, frequent_countries=groups)
        row = {
            "staff_pick": float(feats.staff_pick),
            "day_of_year": float(feats.day_of_year),
            "year": float(feats.year),
            "duration_days": float(feats.duration_days),
            "log_goal": feats.log_goal,
        }
        for col in country_cols:
            row[col] = 0.0
        row[f"country_{feats.country}" if feats.country != "other" else "country_other"] = 1.0
        rows[rec.id] = row
    return FeatureBlock(tag="baseline", rows=rows)


def _counts_block(records: list[ProjectRecord]) -> FeatureBlock:
    rows = {}
    for rec in records:
        n_img, n_vid = count_visuals(rec)
        rows[rec.id] = {
            "n_images": None if n_img is None else float(n_img),
            "n_videos": None if n_vid is None else float(n_vid),
        }
    return FeatureBlock(tag="visual_count", rows=rows)


def _text_column_names(prefix, dicts):
    """Column per (dictionary, category): prefix_category, falling back to
    prefix_dictname_category when two dictionaries share a category name."""
    seen = {}
    for d in dicts:
        for cat in d.categories:
            seen[cat] = seen.get(cat, 0) + 1
    names = {}
    for d in dicts:
        for cat in d.categories:
            if seen[cat] > 1:
                names[(d.name, cat)] = f"{prefix}_{d.name}_{cat}"
            else:
                names[(d.name, cat)] = f"{prefix}_{cat}"
    return names


def _text_block(cfg: PipelineConfig, records: list[ProjectRecord]) -> FeatureBlock:
    full_dicts = [parse_dictionary(cfg.resolve(p)) for p in cfg.text.fulltext_dictionaries]
    blurb_dicts = [parse_dictionary(cfg.resolve(p)) for p in cfg.text.blurb_dictionaries]
    full_cols = _text_column_names("text", full_dicts)
    blurb_cols = _text_column_names("blurb", blurb_dicts)
    rows = {}
    categories = {}
    for rec in records:
        row = {}
        for d in full_dicts:
            scores = score_text(rec.full_text, d)
            for cat, pct in scores.percentages.items():
                col = full_cols[(d.name, cat)]
                row[col] = pct
                categories[col] = "text_description"
        if full_dicts:
            row["text_word_count"] = float(score_text(rec.full_text, full_dicts[0]).word_count)
            categories["text_word_count"] = "text_description"
        for d in blurb_dicts:
            scores = score_text(rec.blurb, d)
            for cat, pct in scores.percentages.items():
                col = blurb_cols[(d.name, cat)]
                row[col] = pct
                categories[col] = "text_blurb"
        for col, val in rec.text_passthrough.items():
            row[col] = val
            categories[col] = "text_description"
        rows[rec.id] = row
    return FeatureBlock(tag="text", rows=rows, categories=categories)


def _image_detail_block(cfg: PipelineConfig, records, manifest, failures) -> FeatureBlock:
    ext = cfg.extraction
    settings = ExtractionSettings(
        max_side=ext.max_side,
        slic_k=ext.slic_k,
        slic_compactness=ext.slic_compactness,
        enable_color=ext.enable_color,
        enable_composition=ext.enable_composition,
        enable_figure_ground=ext.enable_figure_ground,
        enable_faces=ext.enable_faces,
    )
    quality_model = load_quality_model(
        cfg.resolve(ext.quality_model_path) if ext.quality_model_path
        else assets.quality_model_path()
    )
    cascade = load_cascade(
        cfg.resolve(ext.cascade_path) if ext.cascade_path
        else assets.face_cascade_path()
    ) if ext.enable_faces else None

    cache_dir = _cache(cfg)
    rows = {}
    for rec in records:
        rel = manifest.get(rec.id)
        if rel is None:
            failures.append({"id": rec.id, "stage": "image", "error": "no image"})
            continue
        try:
            img = load_image(cache_dir / rel)
            rows[rec.id] = extract_image_details(img, settings, quality_model, cascade)
        except Exception as exc:  # noqa: BLE001 - per-image isolation by design
            failures.append({"id": rec.id, "stage": "image", "error": str(exc)})
    return FeatureBlock(tag="image_detail", rows=rows,
                        categories=dict(IMAGE_DETAIL_CATEGORIES))


def _scene_block(cfg: PipelineConfig, records, annotations) -> FeatureBlock:
    rows = {}
    categories = {}
    for rec in records:
        row = {}
        for name in cfg.annotation.providers:
            ann = annotations.get((name, rec.id))
            tau = cfg.annotation.tau.get(name, 0.5)
            n_col = f"n_concepts_{name}"
            c_col = f"max_confidence_{name}"
            categories[n_col] = categories[c_col] = "scene"
            if ann is None or ann.unannotated:
                row[n_col] = None
                row[c_col] = None
            else:
                row[n_col] = float(num_evoked_concepts(ann, tau))
                ease = ease_of_concept_identification(ann)
                row[c_col] = None if ease is None else ease
        rows[rec.id] = row
    return FeatureBlock(tag="image_detail", rows=rows, categories=categories)


def stage_extract(cfg: PipelineConfig) -> FeatureTable:
    """Assemble the full tagged feature table and persist it."""
    records = _records(cfg)
    manifest = stage_fetch_images(cfg)
    annotations = stage_annotate(cfg) if cfg.annotation.providers else {}
    failures: list[dict] = []

    blocks = [
        _baseline_block(records),
        _counts_block(records),
        _text_block(cfg, records),
        _image_detail_block(cfg, records, manifest, failures),
        _scene_block(cfg, records, annotations),
    ]
    table = assemble(records, blocks)
    out = _out(cfg)
    write_table(table, out / "features.csv", out / "features.manifest.json")
    with open(out / "extract_failures.jsonl", "w", encoding="utf-8") as fh:
        for f in failures:
            fh.write(json.dumps(f, sort_keys=True) + "\n")
    return table


# ------------------------------------------------------------------- train

def _impute_pair(train: FeatureTable, test: FeatureTable, k: int):
    """Impute train from itself, then test cells using train rows as donors."""
    train_imp = impute_missing(train, k=k)
    merged = FeatureTable(
        ids=train_imp.ids + test.ids,
        columns=list(train.columns),
        values=np.vstack([train_imp.values, test.values]),
        outcome=np.concatenate([train_imp.outcome, test.outcome]),
        tags=dict(train.tags),
        categories=dict(train.categories),
    )
    merged_imp = impute_missing(merged, k=k)
    test_imp = merged_imp.select_rows(np.arange(len(train.ids), len(merged.ids)))
    return train_imp, test_imp


def _fit_linear(kind, train, test, cfg, seed):
    k = cfg.models.impute_k
    train_i, test_i = _impute_pair(train, test, k)
    sp = standardize_fit(train_i.values, train_i.columns)
    Ztr = standardize_apply(sp, train_i.values, train_i.columns)
    Zte = standardize_apply(sp, test_i.values, test_i.columns)
    y = train_i.outcome
    if kind == "ridge":
        grid = [{"lam": l} for l in np.logspace(-4, 4, cfg.models.ridge_lambdas)]
        fit_fn = lambda X, yy, p: fit_ridge(X, yy, p["lam"])
    else:
        lam_max = lasso_lambda_max(Ztr, y)
        # wide-data guard: with p >= n the tiny-lambda end is non-unique and
        # coordinate descent crawls, so raise the path floor
        min_frac = 1e-4 if Ztr.shape[0] > Ztr.shape[1] else 1e-2
        fracs = np.logspace(np.log10(min_frac), 0, cfg.models.lasso_lambdas)
        grid = [{"lam": f * lam_max} for f in fracs]
        fit_fn = lambda X, yy, p: fit_lasso(X, yy, p["lam"])
    # weak-to-strong order: ridge ascending lam; lasso ascending lam
    cv = cross_validate(fit_fn, Ztr, y, grid, folds=min(cfg.models.cv_folds, len(y)), seed=seed)
    model = fit_fn(Ztr, y, cv.best_params)
    return model, sp, model.predict(Ztr), model.predict(Zte)


def _fit_gbt_pipeline(train, test, cfg, seed):
    g = cfg.models.gbt
    if g.use_imputed:
        train, test = _impute_pair(train, test, cfg.models.impute_k)
    grid = [
        {"eta": eta, "max_depth": d}
        for eta in g.eta_grid
        for d in g.max_depth_grid
    ]
    grid.sort(key=lambda p: (p["max_depth"], p["eta"]), reverse=True)  # weak->strong

    def cv_fit(X, y, p):
        params = GBTParams(
            eta=p["eta"], max_depth=p["max_depth"], subsample=g.subsample,
            colsample_bytree=g.colsample_bytree,
            n_rounds=max(20, g.n_rounds // 4), seed=seed,
        )
        return fit_gbt(X, y, params)

    cv = cross_validate(cv_fit, train.values, train.outcome, grid,
                        folds=min(cfg.models.cv_folds, len(train.outcome)), seed=seed)
    best = cv.best_params
    rng = np.random.default_rng(seed)
    n = len(train.outcome)
    val_idx = rng.permutation(n)[: max(1, n // 5)]
    fit_mask = np.ones(n, dtype=bool)
    fit_mask[val_idx] = False
    params = GBTParams(
        eta=best["eta"], max_depth=best["max_depth"], subsample=g.subsample,
        colsample_bytree=g.colsample_bytree, n_rounds=g.n_rounds,
        early_stopping_rounds=g.early_stopping_rounds, seed=seed,
    )
    model = fit_gbt(
        train.values[fit_mask], train.outcome[fit_mask], params,
        validation=(train.values[val_idx], train.outcome[val_idx]),
    )
    return model, model.predict(train.values), model.predict(test.values)


def _fit_bart_pipeline(train, test, cfg, seed):
    b = cfg.models.bart
    base = dict(nu=b.nu, q=b.q, alpha=b.alpha, beta_depth=b.beta_depth,
                n_burn=b.n_burn, n_post=b.n_post)
    if b.cv:
        grid = [
            {"m": m, "k": k} for m in sorted(b.m_grid) for k in sorted(b.k_grid)
        ]
        grid.sort(key=lambda p: (-p["m"], p["k"]))  # weak->strong: fewer trees, larger k shrink

        def cv_fit(X, y, p):
            return fit_bart(X, y, BARTParams(m=p["m"], k=p["k"], **base), seed=seed)

        cv = cross_validate(cv_fit, train.values, train.outcome, grid,
                            folds=min(cfg.models.cv_folds, len(train.outcome)),
                            seed=seed)
        params = BARTParams(m=cv.best_params["m"], k=cv.best_params["k"], **base)
    else:
        params = BARTParams(m=b.m, k=b.k, **base)
    model = fit_bart(train.values, train.outcome, params, seed=seed)
    return model, model.predict(train.values), model.predict(test.values)


def stage_train(cfg: PipelineConfig, seed: int | None = None,
                sets: list[int] | None = None,
                learners: list[str] | None = None):
    """Fit the configured learners on each nested variable set; write models
    and a Table-3-style evaluation grid."""
    out = _out(cfg)
    table = read_table(out / "features.csv", out / "features.manifest.json")
    seed = cfg.seed if seed is None else seed
    sets = sets or cfg.models.sets
    learners = learners or cfg.models.learners

    train_full, test_full = split(table, cfg.models.train_fraction, seed)
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    rows = []
    for set_id in sets:
        train = train_full.select_set(set_id)
        test = test_full.select_set(set_id)
        for learner in learners:
            if learner in ("ridge", "lasso"):
                model, sp, pred_tr, pred_te = _fit_linear(learner, train, test, cfg, seed)
                save_model(model, sp.columns, models_dir / f"set{set_id}_{learner}.json")
            elif learner == "gbt":
                model, pred_tr, pred_te = _fit_gbt_pipeline(train, test, cfg, seed)
                save_model(model, train.columns, models_dir / f"set{set_id}_gbt.json")
            else:
                model, pred_tr, pred_te = _fit_bart_pipeline(train, test, cfg, seed)
                save_model(model, train.columns, models_dir / f"set{set_id}_bart.json")
            rows.append((learner, set_id,
                         evaluate(train.outcome, pred_tr, "in-sample", set_id),
                         evaluate(test.outcome, pred_te, "out-of-sample", set_id)))

    _write_eval_grid(out, rows)
    return rows


SET_NAMES = {
    1: "Base",
    2: "Base + Text details",
    3: "Base + Visual counts",
    4: "Base + Image details",
    5: "All",
}

LEARNER_NAMES = {"ridge": "Ridge", "lasso": "Lasso", "gbt": "GBT", "bart": "BART"}


def _write_eval_grid(out: Path, rows) -> None:
    with open(out / "eval_grid.csv", "w", encoding="utf-8") as fh:
        fh.write("model,variable_set,in_rmse,in_mae,out_rmse,out_mae\n")
        for learner, set_id, r_in, r_out in rows:
            fh.write(
                f"{learner},{set_id},{r_in.rmse!r},{r_in.mae!r},"
                f"{r_out.rmse!r},{r_out.mae!r}\n"
            )
    lines = [
        "# Prediction across subsets of variables",
        "",
        "| Model | Variable set | In RMSE | In MAE | Out RMSE | Out MAE |",
        "|---|---|---|---|---|---|",
    ]
    for learner, set_id, r_in, r_out in rows:
        lines.append(
            f"| {LEARNER_NAMES[learner]} | {set_id}) {SET_NAMES[set_id]} "
            f"| {r_in.rmse:.4f} | {r_in.mae:.4f} "
            f"| {r_out.rmse:.4f} | {r_out.mae:.4f} |"
        )
    (out / "eval_grid.md").write_text("\n".join(lines) + "\n")


# -------------------------------------------------------------- importance

def stage_importance(cfg: PipelineConfig, seed: int | None = None):
    """Refit-based inclusion proportions with intervals; CSV + markdown."""
    out = _out(cfg)
    table = read_table(out / "features.csv", out / "features.manifest.json")
    seed = cfg.seed if seed is None else seed
    train_full, _ = split(table, cfg.models.train_fraction, seed)
    train = train_full.select_set(cfg.interpret.importance_set)
    b = cfg.models.bart
    params = BARTParams(m=b.m, k=b.k, nu=b.nu, q=b.q, alpha=b.alpha,
                        beta_depth=b.beta_depth, n_burn=b.n_burn, n_post=b.n_post)
    model = fit_bart(train.values, train.outcome, params, seed=seed)
    report = inclusion_proportions(
        model, train.columns, categories=train.categories,
        n_replicates=cfg.interpret.n_replicates, base_seed=seed + 1,
    )
    with open(out / "importance.csv", "w", encoding="utf-8") as fh:
        fh.write("variable,proportion,lower,upper,significant\n")
        for v in report.variables:
            lo = "" if v.lower is None else repr(v.lower)
            hi = "" if v.upper is None else repr(v.upper)
            sig = "" if v.significant is None else str(v.significant).lower()
            fh.write(f"{v.variable},{v.proportion!r},{lo},{hi},{sig}\n")
    lines = [
        "# Feature importance by category (share of split decisions)",
        "",
        "| Category | Variables | Prop. inclusion | Fraction sig. |",
        "|---|---|---|---|",
    ]
    for c in report.categories:
        frac = "n/a" if c.fraction_significant is None else f"{c.fraction_significant:.0%}"
        lines.append(
            f"| {c.category} | {c.n_variables} | {c.mean_proportion:.2%} | {frac} |"
        )
    (out / "importance.md").write_text("\n".join(lines) + "\n")
    return report


# --------------------------------------------------------------------- pdp

def stage_pdp(cfg: PipelineConfig, variables: list[str] | None = None,
              seed: int | None = None):
    """Partial dependence curves for the configured variables, from the
    serialized BART model of the configured set."""
    out = _out(cfg)
    table = read_table(out / "features.csv", out / "features.manifest.json")
    seed = cfg.seed if seed is None else seed
    train_full, _ = split(table, cfg.models.train_fraction, seed)
    train = train_full.select_set(cfg.interpret.importance_set)
    model_path = out / "models" / f"set{cfg.interpret.importance_set}_bart.json"
    if not model_path.is_file():
        raise ConfigError(f"train the bart model first (missing {model_path})")
    model, columns = load_model(model_path)
    variables = variables or cfg.interpret.pdp_variables
    curves = []
    for var in variables:
        if var not in columns:
            raise ConfigError(f"variable {var!r} not among model columns")
        # KNN-free path: BART handles missing natively, use raw train values
        curve = partial_dependence(
            model, train.values, columns.index(var), variable=var
        )
        curves.append(curve)
        with open(out / f"pdp_{var}.csv", "w", encoding="utf-8") as fh:
            fh.write("grid,effect,lower,upper\n")
            for i in range(len(curve.grid)):
                lo = "" if curve.lower is None else repr(float(curve.lower[i]))
                hi = "" if curve.upper is None else repr(float(curve.upper[i]))
                fh.write(f"{curve.grid[i]!r},{curve.effects[i]!r},{lo},{hi}\n")
    return curves


# ------------------------------------------------------------------ report

def stage_report(cfg: PipelineConfig) -> Path:
    """Bundle the evaluation grid, importance table, and PDP file list."""
    out = _out(cfg)
    parts = ["# fundlens pipeline report", ""]
    for name in ("eval_grid.md", "importance.md"):
        p = out / name
        if p.is_file():
            parts.append(p.read_text().rstrip())
            parts.append("")
    pdps = sorted(out.glob("pdp_*.csv"))
    if pdps:
        parts.append("## Partial dependence curves")
        parts.append("")
        for p in pdps:
            parts.append(f"- {p.name}")
        parts.append("")
    report = out / "report.md"
    report.write_text("\n".join(parts))
    return report
