"""Bayesian additive regression trees: sum-of-trees backfitting MCMC.

The outcome is rescaled to [-0.5, 0.5] internally.  Each iteration proposes a
grow / prune / change move per tree (probabilities 0.25 / 0.25 / 0.5) accepted
by Metropolis-Hastings against the depth prior p(split at depth d) =
alpha (1+d)^(-beta), draws conjugate normal leaf values (sigma_mu =
0.5 / (k sqrt(m))), and draws the residual variance from its scaled
inverse-chi^2 posterior (nu, lambda calibrated so the prior puts mass q below
the sample variance).  Split rules are drawn uniformly over available
predictors and their observed cutpoints, so rule densities cancel out of the
acceptance ratios.  Missing values route by a per-node direction flag sampled
with the rule.

Predictions are posterior means over the stored post-burn-in draws; per-draw
predictions are exposed for interval construction.  Fits are bit-reproducible
for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

P_GROW = 0.25
P_PRUNE = 0.25
P_CHANGE = 0.5


@dataclass(frozen=True)
class BARTParams:
    m: int = 200
    k: float = 2.0
    nu: float = 3.0
    q: float = 0.9
    alpha: float = 0.95
    beta_depth: float = 2.0
    n_burn: int = 250
    n_post: int = 500

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.k <= 0:
            raise ValueError("k must be > 0")
        if self.nu <= 0 or not (0 < self.q < 1):
            raise ValueError("nu must be > 0 and q in (0, 1)")
        if not (0 < self.alpha < 1) or self.beta_depth < 0:
            raise ValueError("alpha must be in (0,1), beta_depth >= 0")
        if self.n_burn < 0 or self.n_post < 1:
            raise ValueError("n_burn >= 0 and n_post >= 1 required")


class _Node:
    __slots__ = ("feature", "threshold", "missing_left", "left", "right",
                 "rows", "value", "depth", "parent")

    def __init__(self, rows, depth, parent=None):
        self.feature = None
        self.threshold = 0.0
        self.missing_left = True
        self.left = None
        self.right = None
        self.rows = rows  # row indices; kept on leaves
        self.value = 0.0
        self.depth = depth
        self.parent = parent

    @property
    def is_leaf(self):
        return self.feature is None


def _leaves(node):
    stack, out = [node], []
    while stack:
        nd = stack.pop()
        if nd.is_leaf:
            out.append(nd)
        else:
            stack.append(nd.right)
            stack.append(nd.left)
    return out


def _internal(node):
    stack, out = [node], []
    while stack:
        nd = stack.pop()
        if not nd.is_leaf:
            out.append(nd)
            stack.append(nd.right)
            stack.append(nd.left)
    return out


def _singly_internal(node):
    return [nd for nd in _internal(node) if nd.left.is_leaf and nd.right.is_leaf]


class _SumOfTrees:
    """Sampler state for one BART fit."""

    def __init__(self, X, y_scaled, params: BARTParams, rng: np.random.Generator):
        self.X = X
        self.y = y_scaled
        self.params = params
        self.rng = rng
        n, self.p = X.shape
        self.n = n
        self.sigma_mu = 0.5 / (params.k * np.sqrt(params.m))
        sigma_hat = float(y_scaled.std())
        if sigma_hat <= 0:
            sigma_hat = 1e-3
        # lambda: P(sigma^2 <= sigma_hat^2) = q under scaled-inv-chi2(nu, lambda)
        self.lambda_sigma = (
            sigma_hat**2 * stats.chi2.ppf(1 - params.q, params.nu) / params.nu
        )
        self.sigma2 = sigma_hat**2
        all_rows = np.arange(n)
        self.trees = [_Node(all_rows, 0) for _ in range(params.m)]
        self.tree_fits = np.zeros((params.m, n))
        self.total_fit = np.zeros(n)

    # -- move machinery ----------------------------------------------------

    def _p_split(self, depth):
        return self.params.alpha * (1.0 + depth) ** (-self.params.beta_depth)

    def _valid_features(self, rows):
        out = []
        for f in range(self.p):
            v = self.X[rows, f]
            v = v[~np.isnan(v)]
            if len(v) >= 2 and v.min() < v.max():
                out.append(f)
        return out

    def _draw_rule(self, rows, feature):
        vals = self.X[rows, feature]
        uniq = np.unique(vals[~np.isnan(vals)])
        cut = float(self.rng.choice(uniq[:-1]))
        missing_left = bool(self.rng.random() < 0.5)
        return cut, missing_left

    def _partition(self, rows, feature, threshold, missing_left):
        vals = self.X[rows, feature]
        miss = np.isnan(vals)
        left = (vals <= threshold) | (miss & missing_left)
        return rows[left], rows[~left]

    def _log_marginal(self, n_rows, resid_sum):
        s2 = self.sigma2
        sm2 = self.sigma_mu**2
        denom = s2 + n_rows * sm2
        return 0.5 * np.log(s2 / denom) + sm2 * resid_sum**2 / (2 * s2 * denom)

    def _move_probs(self, tree):
        growable = [lf for lf in _leaves(tree) if self._valid_features(lf.rows)]
        si = _singly_internal(tree)
        weights = {}
        if growable:
            weights["grow"] = P_GROW
        if si:
            weights["prune"] = P_PRUNE
            weights["change"] = P_CHANGE
        total = sum(weights.values())
        return {k: v / total for k, v in weights.items()}, growable, si

    def _update_tree(self, j):
        tree = self.trees[j]
        resid = self.y - self.total_fit + self.tree_fits[j]
        probs, growable, si = self._move_probs(tree)
        if not probs:
            self._draw_leaf_values(j, tree, resid)
            return
        moves = sorted(probs)
        pick = self.rng.choice(moves, p=[probs[mv] for mv in moves])
        if pick == "grow":
            tree = self._try_grow(j, tree, resid, probs, growable)
        elif pick == "prune":
            tree = self._try_prune(j, tree, resid, probs, si)
        else:
            self._try_change(tree, resid, si)
        self.trees[j] = tree
        self._draw_leaf_values(j, tree, resid)

    def _try_grow(self, j, tree, resid, probs, growable):
        leaf = growable[self.rng.integers(len(growable))]
        feats = self._valid_features(leaf.rows)
        feature = feats[self.rng.integers(len(feats))]
        threshold, missing_left = self._draw_rule(leaf.rows, feature)
        rows_l, rows_r = self._partition(leaf.rows, feature, threshold, missing_left)
        if len(rows_l) == 0 or len(rows_r) == 0:
            return tree

        d = leaf.depth
        log_prior = (
            np.log(self._p_split(d))
            + np.log(1 - self._p_split(d + 1)) * 2
            - np.log(1 - self._p_split(d))
        )
        s_parent = resid[leaf.rows].sum()
        s_l = resid[rows_l].sum()
        log_lik = (
            self._log_marginal(len(rows_l), s_l)
            + self._log_marginal(len(rows_r), s_parent - s_l)
            - self._log_marginal(len(leaf.rows), s_parent)
        )
        # transition: grow picked a growable leaf; reverse prune picks among
        # the proposed tree's singly-internal nodes
        leaf.feature = feature  # tentatively apply to count reverse moves
        leaf.threshold = threshold
        leaf.missing_left = missing_left
        leaf.left = _Node(rows_l, d + 1, leaf)
        leaf.right = _Node(rows_r, d + 1, leaf)
        probs_new, _, si_new = self._move_probs(tree)
        log_trans = (
            np.log(probs_new.get("prune", 0.0))
            - np.log(len(si_new))
            - np.log(probs["grow"])
            + np.log(len(growable))
        )
        log_accept = log_prior + log_lik + log_trans
        if np.log(self.rng.random()) < log_accept:
            return tree
        # revert
        leaf.feature = None
        leaf.left = None
        leaf.right = None
        return tree

    def _try_prune(self, j, tree, resid, probs, si):
        node = si[self.rng.integers(len(si))]
        d = node.depth
        log_prior = -(
            np.log(self._p_split(d))
            + np.log(1 - self._p_split(d + 1)) * 2
            - np.log(1 - self._p_split(d))
        )
        s_l = resid[node.left.rows].sum()
        s_r = resid[node.right.rows].sum()
        rows = node.rows
        log_lik = (
            self._log_marginal(len(rows), s_l + s_r)
            - self._log_marginal(len(node.left.rows), s_l)
            - self._log_marginal(len(node.right.rows), s_r)
        )
        saved = (node.feature, node.threshold, node.missing_left, node.left, node.right)
        node.feature = None
        node.left = None
        node.right = None
        probs_new, growable_new, _ = self._move_probs(tree)
        log_trans = (
            np.log(probs_new.get("grow", 0.0))
            - np.log(max(len(growable_new), 1))
            - np.log(probs["prune"])
            + np.log(len(si))
        )
        log_accept = log_prior + log_lik + log_trans
        if np.log(self.rng.random()) < log_accept:
            return tree
        node.feature, node.threshold, node.missing_left, node.left, node.right = saved
        return tree

    def _try_change(self, tree, resid, si):
        node = si[self.rng.integers(len(si))]
        feats = self._valid_features(node.rows)
        if not feats:
            return
        feature = feats[self.rng.integers(len(feats))]
        threshold, missing_left = self._draw_rule(node.rows, feature)
        rows_l, rows_r = self._partition(node.rows, feature, threshold, missing_left)
        if len(rows_l) == 0 or len(rows_r) == 0:
            return
        s_l_new = resid[rows_l].sum()
        s_r_new = resid[rows_r].sum()
        s_l_old = resid[node.left.rows].sum()
        s_r_old = resid[node.right.rows].sum()
        log_accept = (
            self._log_marginal(len(rows_l), s_l_new)
            + self._log_marginal(len(rows_r), s_r_new)
            - self._log_marginal(len(node.left.rows), s_l_old)
            - self._log_marginal(len(node.right.rows), s_r_old)
        )
        if np.log(self.rng.random()) < log_accept:
            node.feature = feature
            node.threshold = threshold
            node.missing_left = missing_left
            node.left.rows = rows_l
            node.right.rows = rows_r

    def _draw_leaf_values(self, j, tree, resid):
        fit = self.tree_fits[j]
        new_fit = np.empty(self.n)
        s2 = self.sigma2
        sm2 = self.sigma_mu**2
        for leaf in _leaves(tree):
            n_rows = len(leaf.rows)
            v_post = 1.0 / (1.0 / sm2 + n_rows / s2)
            m_post = v_post * resid[leaf.rows].sum() / s2
            leaf.value = m_post + np.sqrt(v_post) * self.rng.standard_normal()
            new_fit[leaf.rows] = leaf.value
        self.total_fit += new_fit - fit
        self.tree_fits[j] = new_fit

    def _draw_sigma2(self):
        err = self.y - self.total_fit
        df = self.params.nu + self.n
        scale = self.params.nu * self.lambda_sigma + float(err @ err)
        self.sigma2 = scale / self.rng.chisquare(df)

    def iterate(self):
        for j in range(self.params.m):
            self._update_tree(j)
        self._draw_sigma2()

    def snapshot(self):
        """Compact copy of the current trees plus per-variable split counts."""
        split_counts = np.zeros(self.p, dtype=np.int64)

        def compact(node):
            if node.is_leaf:
                return (None, node.value)
            split_counts[node.feature] += 1
            return (
                (node.feature, node.threshold, node.missing_left),
                compact(node.left),
                compact(node.right),
            )

        return [compact(t) for t in self.trees], split_counts


def _predict_compact(tree, X, out, idx):
    head = tree[0]
    if head is None:
        out[idx] += tree[1]
        return
    feature, threshold, missing_left = head
    vals = X[idx, feature]
    miss = np.isnan(vals)
    left = (vals <= threshold) | (miss & missing_left)
    _predict_compact(tree[1], X, out, idx[left])
    _predict_compact(tree[2], X, out, idx[~left])


@dataclass
class BARTModel:
    draws: list  # per draw: list of compact trees
    sigma_draws: np.ndarray
    split_counts: np.ndarray  # (n_draws, p)
    y_min: float
    y_max: float
    params: BARTParams
    seed: int
    train_data: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def n_draws(self) -> int:
        return len(self.draws)

    def _scale(self):
        return max(self.y_max - self.y_min, 1e-12)

    def predict_draws(self, X: np.ndarray) -> np.ndarray:
        """(n_draws, n) matrix of per-draw predictions in outcome units."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((self.n_draws, len(X)))
        idx = np.arange(len(X))
        for d, trees in enumerate(self.draws):
            acc = np.zeros(len(X))
            for tree in trees:
                _predict_compact(tree, X, acc, idx)
            out[d] = (acc + 0.5) * self._scale() + self.y_min
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Posterior mean prediction."""
        return self.predict_draws(X).mean(axis=0)

    def refit(self, seed: int) -> "BARTModel":
        """Independent-seed refit on the retained training data."""
        if self.train_data is None:
            raise ValueError("model was not fit in this session; no training data")
        X, y = self.train_data
        return fit_bart(X, y, self.params, seed=seed)


def fit_bart(X: np.ndarray, y: np.ndarray, params: BARTParams, seed: int = 0) -> BARTModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    y_min, y_max = float(y.min()), float(y.max())
    scale = max(y_max - y_min, 1e-12)
    y_scaled = (y - y_min) / scale - 0.5

    rng = np.random.default_rng(seed)
    state = _SumOfTrees(X, y_scaled, params, rng)
    for _ in range(params.n_burn):
        state.iterate()
    draws, sigmas, counts = [], [], []
    for _ in range(params.n_post):
        state.iterate()
        trees, split_counts = state.snapshot()
        draws.append(trees)
        sigmas.append(np.sqrt(state.sigma2) * scale)
        counts.append(split_counts)
    return BARTModel(
        draws=draws,
        sigma_draws=np.asarray(sigmas),
        split_counts=np.asarray(counts),
        y_min=y_min,
        y_max=y_max,
        params=params,
        seed=seed,
        train_data=(X, y),
    )
