"""Cross-validation and evaluation protocol shared by all four learners."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    rmse: float
    mae: float
    scope: str  # "in-sample" | "out-of-sample"
    variable_set: int | None = None

    def __post_init__(self):
        if self.scope not in ("in-sample", "out-of-sample"):
            raise ValueError("scope must be 'in-sample' or 'out-of-sample'")
        if self.rmse < 0 or self.mae < 0:
            raise ValueError("rmse/mae must be >= 0")


def evaluate(y_true: np.ndarray, y_pred: np.ndarray, scope: str,
             variable_set: int | None = None) -> EvalReport:
    """RMSE and MAE on the natural outcome scale."""
    err = np.asarray(y_true, dtype=np.float64) - np.asarray(y_pred, dtype=np.float64)
    return EvalReport(
        rmse=float(np.sqrt(np.mean(err**2))),
        mae=float(np.mean(np.abs(err))),
        scope=scope,
        variable_set=variable_set,
    )


@dataclass(frozen=True)
class CVResult:
    best_params: dict
    best_index: int
    mean_mse: np.ndarray  # per grid point


def fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Deterministic partition of range(n) into near-equal folds."""
    if folds < 2 or folds > n:
        raise ValueError("folds must be in [2, n]")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, folds)]


def cross_validate(fit_fn, X: np.ndarray, y: np.ndarray, grid: list[dict],
                   folds: int = 10, seed: int = 0) -> CVResult:
    """Mean validation MSE per grid point.

    `fit_fn(X_train, y_train, params) -> model` with `model.predict(X)`.
    Declare grids in weak-to-strong regularization order: exact MSE ties
    resolve to the last (most regularized) tied entry.
    """
    if not grid:
        raise ValueError("grid must be nonempty")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    fold_sets = fold_indices(len(y), folds, seed)
    mse = np.zeros(len(grid))
    for val_idx in fold_sets:
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[val_idx] = False
        X_tr, y_tr = X[train_mask], y[train_mask]
        X_va, y_va = X[val_idx], y[val_idx]
        for gi, params in enumerate(grid):
            model = fit_fn(X_tr, y_tr, params)
            pred = model.predict(X_va)
            mse[gi] += np.mean((y_va - pred) ** 2) * len(val_idx)
    mse /= len(y)
    best = int(np.max(np.nonzero(mse == mse.min())[0]))
    return CVResult(best_params=grid[best], best_index=best, mean_mse=mse)
