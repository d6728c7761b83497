"""Versioned JSON serialization for trained models.

Trees are nested lists; linear models are column -> coefficient maps.  The
format is consumed by the importance/pdp CLI commands and round-trips exactly
(floats via repr).
"""

from __future__ import annotations

import json

import numpy as np

from .bart import BARTModel, BARTParams
from .gbt import GBTModel, TreeNode
from .linear import LinearModel

FORMAT_VERSION = 1


def _tree_to_obj(node: TreeNode):
    if node.is_leaf:
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "missing_left": node.missing_left,
        "left": _tree_to_obj(node.left),
        "right": _tree_to_obj(node.right),
    }


def _tree_from_obj(obj) -> TreeNode:
    if "feature" not in obj:
        return TreeNode(value=obj["value"])
    return TreeNode(
        feature=obj["feature"],
        threshold=obj["threshold"],
        missing_left=obj["missing_left"],
        left=_tree_from_obj(obj["left"]),
        right=_tree_from_obj(obj["right"]),
    )


def model_to_obj(model, columns: list[str]) -> dict:
    if isinstance(model, LinearModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": model.kind,
            "columns": columns,
            "intercept": model.intercept,
            "penalty": model.penalty,
            "coefficients": {c: float(v) for c, v in zip(columns, model.coefficients)},
            "column_means": {c: float(v) for c, v in zip(columns, model.column_means)},
        }
    if isinstance(model, GBTModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "gbt",
            "columns": columns,
            "base_score": model.base_score,
            "eta": model.eta,
            "trees": [_tree_to_obj(t) for t in model.trees],
        }
    if isinstance(model, BARTModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "bart",
            "columns": columns,
            "y_min": model.y_min,
            "y_max": model.y_max,
            "seed": model.seed,
            "params": {
                "m": model.params.m,
                "k": model.params.k,
                "nu": model.params.nu,
                "q": model.params.q,
                "alpha": model.params.alpha,
                "beta_depth": model.params.beta_depth,
                "n_burn": model.params.n_burn,
                "n_post": model.params.n_post,
            },
            "sigma_draws": [float(s) for s in model.sigma_draws],
            "split_counts": model.split_counts.tolist(),
            "draws": model.draws,
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _tuplify_draws(draws):
    def fix(tree):
        if tree[0] is None:
            return (None, tree[1])
        head = tree[0]
        return ((head[0], head[1], head[2]), fix(tree[1]), fix(tree[2]))

    return [[fix(t) for t in trees] for trees in draws]


def model_from_obj(obj: dict):
    if obj.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {obj.get('format_version')}")
    kind = obj["kind"]
    columns = list(obj["columns"])
    if kind in ("ridge", "lasso"):
        model = LinearModel(
            kind=kind,
            coefficients=np.array([obj["coefficients"][c] for c in columns]),
            intercept=float(obj["intercept"]),
            penalty=float(obj["penalty"]),
            column_means=np.array([obj["column_means"][c] for c in columns]),
        )
        return model, columns
    if kind == "gbt":
        model = GBTModel(
            base_score=float(obj["base_score"]),
            eta=float(obj["eta"]),
            trees=[_tree_from_obj(t) for t in obj["trees"]],
        )
        return model, columns
    if kind == "bart":
        model = BARTModel(
            draws=_tuplify_draws(obj["draws"]),
            sigma_draws=np.array(obj["sigma_draws"]),
            split_counts=np.array(obj["split_counts"], dtype=np.int64),
            y_min=float(obj["y_min"]),
            y_max=float(obj["y_max"]),
            params=BARTParams(**obj["params"]),
            seed=int(obj["seed"]),
        )
        return model, columns
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, columns: list[str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_obj(model, columns), fh, sort_keys=True,
                  separators=(",", ":"))
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_obj(json.load(fh))
