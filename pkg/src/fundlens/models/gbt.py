"""Squared-error gradient boosting with exact greedy splits.

Each round fits a depth-limited regression tree to the current residuals.
Split gain uses the leaf penalty Omega = gamma * leaves + (lambda/2) * sum w^2
(so gain = 1/2 [GL^2/(NL+lambda) + GR^2/(NR+lambda) - G^2/(N+lambda)] - gamma
with unit hessians), and leaf values are sum(residuals)/(count + lambda).
Missing values learn a per-split default direction by trying both sides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GBTParams:
    eta: float = 0.1
    max_depth: int = 3
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    n_rounds: int = 200
    early_stopping_rounds: int | None = None
    reg_lambda: float = 1.0
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValueError("eta must be in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not (0.0 < self.subsample <= 1.0):
            raise ValueError("subsample must be in (0, 1]")
        if not (0.0 < self.colsample_bytree <= 1.0):
            raise ValueError("colsample_bytree must be in (0, 1]")
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if self.reg_lambda < 0 or self.gamma < 0:
            raise ValueError("penalties must be >= 0")


@dataclass
class TreeNode:
    feature: int | None = None  # None -> leaf
    threshold: float = 0.0
    missing_left: bool = True
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def predict_tree(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    _route(node, X, np.arange(len(X)), out)
    return out


def _route(node: TreeNode, X, idx, out):
    if node.is_leaf:
        out[idx] = node.value
        return
    vals = X[idx, node.feature]
    miss = np.isnan(vals)
    goes_left = (vals <= node.threshold) | (miss & node.missing_left)
    _route(node.left, X, idx[goes_left], out)
    _route(node.right, X, idx[~goes_left], out)


def _best_split(X, grad, idx, features, reg_lambda, gamma):
    """Exact greedy scan: returns (gain, feature, threshold, missing_left)."""
    G = grad[idx].sum()
    N = len(idx)
    parent = G * G / (N + reg_lambda)
    best = (0.0, None, 0.0, True)
    for f in features:
        vals = X[idx, f]
        miss = np.isnan(vals)
        pres_idx = idx[~miss]
        pres_vals = vals[~miss]
        if len(pres_vals) < 2:
            continue
        order = np.argsort(pres_vals, kind="stable")
        sv = pres_vals[order]
        sg = grad[pres_idx][order]
        cum_g = np.cumsum(sg)
        cum_n = np.arange(1, len(sv) + 1, dtype=np.float64)
        G_miss = grad[idx[miss]].sum()
        N_miss = int(miss.sum())
        # candidate cuts between distinct adjacent values
        cut = np.nonzero(sv[1:] > sv[:-1])[0]
        if len(cut) == 0:
            continue
        GL = cum_g[cut]
        NL = cum_n[cut]
        for miss_left in (True, False) if N_miss else (True,):
            gl = GL + (G_miss if miss_left else 0.0)
            nl = NL + (N_miss if miss_left else 0.0)
            gr = G - gl
            nr = N - nl
            gain = 0.5 * (
                gl * gl / (nl + reg_lambda) + gr * gr / (nr + reg_lambda) - parent
            ) - gamma
            k = int(np.argmax(gain))
            if gain[k] > best[0]:
                thr = 0.5 * (sv[cut[k]] + sv[cut[k] + 1])
                best = (float(gain[k]), f, thr, miss_left)
    return best


def _build_tree(X, grad, idx, features, depth, params) -> TreeNode:
    G = grad[idx].sum()
    node = TreeNode(value=G / (len(idx) + params.reg_lambda))
    if depth >= params.max_depth or len(idx) < 2:
        return node
    gain, f, thr, miss_left = _best_split(
        X, grad, idx, features, params.reg_lambda, params.gamma
    )
    if f is None or gain <= 1e-12:
        return node
    vals = X[idx, f]
    miss = np.isnan(vals)
    goes_left = (vals <= thr) | (miss & miss_left)
    node.feature = int(f)
    node.threshold = float(thr)
    node.missing_left = bool(miss_left)
    node.left = _build_tree(X, grad, idx[goes_left], features, depth + 1, params)
    node.right = _build_tree(X, grad, idx[~goes_left], features, depth + 1, params)
    node.value = 0.0
    return node


@dataclass
class GBTModel:
    base_score: float
    eta: float
    trees: list[TreeNode]
    train_rmse_per_round: list[float] = field(default_factory=list, repr=False)
    best_round: int | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.full(len(X), self.base_score)
        for tree in self.trees:
            out += self.eta * predict_tree(tree, X)
        return out


def fit_gbt(
    X: np.ndarray,
    y: np.ndarray,
    params: GBTParams,
    validation: tuple[np.ndarray, np.ndarray] | None = None,
) -> GBTModel:
    """Boost with optional early stopping on validation RMSE.

    With early stopping, the returned model is trimmed to the best round.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(params.seed)
    n, p = X.shape
    base = float(y.mean())
    pred = np.full(n, base)
    model = GBTModel(base_score=base, eta=params.eta, trees=[])

    if validation is not None:
        X_val = np.asarray(validation[0], dtype=np.float64)
        y_val = np.asarray(validation[1], dtype=np.float64)
        val_pred = np.full(len(y_val), base)
        best_val = np.inf
        best_round = 0
        since_best = 0

    for round_no in range(params.n_rounds):
        if params.subsample < 1.0:
            rows = rng.choice(n, size=max(1, int(params.subsample * n)), replace=False)
            rows.sort()
        else:
            rows = np.arange(n)
        if params.colsample_bytree < 1.0:
            k = max(1, int(params.colsample_bytree * p))
            features = np.sort(rng.choice(p, size=k, replace=False))
        else:
            features = np.arange(p)

        grad = y - pred
        tree = _build_tree(X, grad, rows, features, 0, params)
        model.trees.append(tree)
        pred += params.eta * predict_tree(tree, X)
        model.train_rmse_per_round.append(float(np.sqrt(np.mean((y - pred) ** 2))))

        if validation is not None:
            val_pred += params.eta * predict_tree(tree, X_val)
            val_rmse = float(np.sqrt(np.mean((y_val - val_pred) ** 2)))
            if val_rmse < best_val - 1e-12:
                best_val = val_rmse
                best_round = round_no + 1
                since_best = 0
            else:
                since_best += 1
                if (
                    params.early_stopping_rounds is not None
                    and since_best >= params.early_stopping_rounds
                ):
                    break

    if validation is not None and params.early_stopping_rounds is not None:
        model.trees = model.trees[: max(best_round, 1)]
        model.train_rmse_per_round = model.train_rmse_per_round[: max(best_round, 1)]
        model.best_round = best_round
    return model
