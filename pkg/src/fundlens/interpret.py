"""Interpretation tools for the fitted models: split-based variable
importance with replicate intervals, null-resample importance tests, and
partial dependence curves evaluated at quintiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models.bart import BARTModel, BARTParams, fit_bart
from .models.gbt import GBTParams, fit_gbt
from .table import FeatureTable

PDP_QUANTILES = (0.1, 0.3, 0.5, 0.7, 0.9)
PDP_MAX_DISCRETE = 10


@dataclass(frozen=True)
class VariableImportance:
    variable: str
    proportion: float
    lower: float | None
    upper: float | None
    significant: bool | None


@dataclass(frozen=True)
class CategoryImportance:
    category: str
    n_variables: int
    mean_proportion: float
    fraction_significant: float | None


@dataclass(frozen=True)
class ImportanceReport:
    variables: list[VariableImportance]
    categories: list[CategoryImportance]
    n_replicates: int
    has_intervals: bool


def _single_fit_proportions(model: BARTModel) -> np.ndarray:
    counts = model.split_counts.sum(axis=0).astype(np.float64)
    total = counts.sum()
    if total == 0:
        return np.zeros(len(counts))
    return counts / total


def inclusion_proportions(
    model: BARTModel,
    columns: list[str],
    categories: dict[str, str] | None = None,
    n_replicates: int = 10,
    base_seed: int = 10_000,
) -> ImportanceReport:
    """Share of split decisions using each variable, across posterior draws.

    Intervals are mean +/- 1.96 sd over `n_replicates` independent-seed
    refits; a variable is significant when its interval excludes zero.
    Fewer than 2 replicates yields point estimates only, flagged.
    """
    if n_replicates < 2:
        props = _single_fit_proportions(model)
        variables = [
            VariableImportance(variable=c, proportion=float(p), lower=None,
                               upper=None, significant=None)
            for c, p in zip(columns, props)
        ]
        return ImportanceReport(
            variables=variables,
            categories=_category_summary(variables, columns, categories),
            n_replicates=max(n_replicates, 1),
            has_intervals=False,
        )

    reps = [_single_fit_proportions(model)]
    for i in range(n_replicates - 1):
        reps.append(_single_fit_proportions(model.refit(seed=base_seed + i)))
    reps = np.asarray(reps)
    mean = reps.mean(axis=0)
    sd = reps.std(axis=0, ddof=1)
    lower = mean - 1.96 * sd
    upper = mean + 1.96 * sd
    variables = [
        VariableImportance(
            variable=c,
            proportion=float(mean[j]),
            lower=float(lower[j]),
            upper=float(upper[j]),
            significant=bool(lower[j] > 0.0),
        )
        for j, c in enumerate(columns)
    ]
    return ImportanceReport(
        variables=variables,
        categories=_category_summary(variables, columns, categories),
        n_replicates=n_replicates,
        has_intervals=True,
    )


def _category_summary(variables, columns, categories):
    if categories is None:
        return []
    groups: dict[str, list[VariableImportance]] = {}
    for v in variables:
        groups.setdefault(categories.get(v.variable, "other"), []).append(v)
    out = []
    for cat in sorted(groups):
        vs = groups[cat]
        sig = [v.significant for v in vs if v.significant is not None]
        out.append(
            CategoryImportance(
                category=cat,
                n_variables=len(vs),
                mean_proportion=float(np.mean([v.proportion for v in vs])),
                fraction_significant=(float(np.mean(sig)) if sig else None),
            )
        )
    out.sort(key=lambda c: -c.mean_proportion)
    return out


def pseudo_r2(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """1 - SSE/SST with SST around the evaluation-set mean."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    if sst == 0:
        raise ValueError("constant outcome: pseudo-R2 undefined")
    sse = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - sse / sst


_NULL_TEST_LEARNERS = {
    "bart": lambda X, y, seed: fit_bart(
        X, y, BARTParams(m=20, n_burn=50, n_post=100), seed=seed
    ),
    "gbt": lambda X, y, seed: fit_gbt(
        X, y, GBTParams(eta=0.1, max_depth=3, n_rounds=120, seed=seed)
    ),
}


def null_importance_test(
    train: FeatureTable,
    test: FeatureTable,
    subset: list[str],
    n_resamples: int = 100,
    learner: str = "bart",
    seed: int = 0,
) -> float:
    """Fraction of bootstrap resamples where removing `subset` lowers
    pseudo-R2 on the untouched test split.

    Each resample bootstraps the training rows, fits the learner with and
    without the subset columns, and compares test pseudo-R2.
    """
    if not subset:
        raise ValueError("subset must be nonempty")
    missing = [c for c in subset if c not in train.columns]
    if missing:
        raise ValueError(f"subset columns not in table: {', '.join(missing)}")
    if set(subset) == set(train.columns):
        raise ValueError("subset must not cover every feature column")
    fit = _NULL_TEST_LEARNERS[learner] if isinstance(learner, str) else learner

    reduced_train = train.drop_columns(subset)
    reduced_test = test.drop_columns(subset)
    rng = np.random.default_rng(seed)
    n = len(train.ids)
    reductions = 0
    for i in range(n_resamples):
        rows = rng.integers(0, n, size=n)
        fit_seed = int(rng.integers(0, 2**31 - 1))
        full = fit(train.values[rows], train.outcome[rows], fit_seed)
        red = fit(reduced_train.values[rows], reduced_train.outcome[rows], fit_seed)
        r2_full = pseudo_r2(test.outcome, full.predict(test.values))
        r2_red = pseudo_r2(reduced_test.outcome, red.predict(reduced_test.values))
        if r2_red < r2_full:
            reductions += 1
    return reductions / n_resamples


@dataclass(frozen=True)
class PDPCurve:
    variable: str
    grid: np.ndarray
    effects: np.ndarray
    lower: np.ndarray | None = None  # pointwise 95% posterior band (BART)
    upper: np.ndarray | None = None
    single_point: bool = field(default=False)

    def __post_init__(self):
        if len(self.grid) > 1 and not np.all(np.diff(self.grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if len(self.effects) != len(self.grid):
            raise ValueError("one effect per grid point")


def pdp_grid(values: np.ndarray) -> np.ndarray:
    """Quintile grid for continuous variables; observed support for
    integer/binary variables with few levels."""
    observed = values[~np.isnan(values)]
    uniq = np.unique(observed)
    if len(uniq) == 1:
        return uniq
    if len(uniq) <= PDP_MAX_DISCRETE and np.all(uniq == np.rint(uniq)):
        return uniq
    return np.unique(np.quantile(observed, PDP_QUANTILES))


def partial_dependence(
    model,
    X_train: np.ndarray,
    column_index: int,
    variable: str | None = None,
    grid: np.ndarray | None = None,
) -> PDPCurve:
    """Average prediction as one variable sweeps the grid, with the other
    columns held at their observed training values.  BART models also report
    pointwise 95% posterior intervals."""
    X_train = np.asarray(X_train, dtype=np.float64)
    if not (0 <= column_index < X_train.shape[1]):
        raise ValueError("column_index out of range")
    values = X_train[:, column_index]
    if grid is None:
        grid = pdp_grid(values)
    grid = np.asarray(grid, dtype=np.float64)

    effects = np.empty(len(grid))
    lower = upper = None
    is_bart = isinstance(model, BARTModel)
    if is_bart:
        lower = np.empty(len(grid))
        upper = np.empty(len(grid))
    for gi, v in enumerate(grid):
        X_mod = X_train.copy()
        X_mod[:, column_index] = v
        if is_bart:
            per_draw = model.predict_draws(X_mod).mean(axis=1)
            effects[gi] = per_draw.mean()
            lower[gi] = np.percentile(per_draw, 2.5)
            upper[gi] = np.percentile(per_draw, 97.5)
        else:
            effects[gi] = float(np.mean(model.predict(X_mod)))
    return PDPCurve(
        variable=variable or f"x{column_index}",
        grid=grid,
        effects=effects,
        lower=lower,
        upper=upper,
        single_point=len(grid) == 1,
    )
