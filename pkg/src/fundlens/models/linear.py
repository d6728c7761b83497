"""Regularized linear models: ridge (normal equations) and lasso
(cyclic coordinate descent with soft-thresholding), plus the train-only
standardization they require.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError

LASSO_TOL = 1e-7
LASSO_MAX_SWEEPS = 100_000


@dataclass(frozen=True)
class StandardizationParams:
    columns: list[str]
    mean: np.ndarray
    sd: np.ndarray
    dropped: list[str]


def standardize_fit(values: np.ndarray, columns: list[str]) -> StandardizationParams:
    """Column means/sds from the training set only; zero-variance columns are
    dropped with a warning."""
    mu = np.nanmean(values, axis=0)
    sd = np.nanstd(values, axis=0)
    keep = sd > 0
    dropped = [c for c, k in zip(columns, keep) if not k]
    if dropped:
        warnings.warn(f"dropping zero-variance columns: {', '.join(dropped)}")
    return StandardizationParams(
        columns=[c for c, k in zip(columns, keep) if k],
        mean=mu[keep],
        sd=sd[keep],
        dropped=dropped,
    )


def standardize_apply(params: StandardizationParams, values: np.ndarray,
                      columns: list[str]) -> np.ndarray:
    """(x - mu)/sd with the training parameters, selecting params.columns."""
    pos = {c: i for i, c in enumerate(columns)}
    idx = [pos[c] for c in params.columns]
    return (values[:, idx] - params.mean) / params.sd


@dataclass(frozen=True)
class LinearModel:
    kind: str  # "ridge" | "lasso"
    coefficients: np.ndarray
    intercept: float
    penalty: float
    column_means: np.ndarray  # training means of the (standardized) design

    def __post_init__(self):
        if not np.isfinite(self.coefficients).all() or not np.isfinite(self.intercept):
            raise ValueError("non-finite linear model")

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + (np.asarray(X) - self.column_means) @ self.coefficients


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> LinearModel:
    """Minimize sum (y - yhat)^2 + lam * sum beta^2 by the normal equations on
    centered data; intercept = mean(y).  Expects standardized X."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    yc = y - y.mean()
    A = Xc.T @ Xc + lam * np.eye(X.shape[1])
    if lam == 0 and np.linalg.cond(A) > 1e12:
        raise ValueError("singular system at lam=0; use lam > 0")
    beta = np.linalg.solve(A, Xc.T @ yc)
    return LinearModel(
        kind="ridge", coefficients=beta, intercept=float(y.mean()),
        penalty=float(lam), column_means=x_mean,
    )


def _soft_threshold(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest lam with an all-zero solution: max |Xc' yc| / n."""
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    return float(np.max(np.abs(Xc.T @ yc)) / len(y))


def fit_lasso(X: np.ndarray, y: np.ndarray, lam: float) -> LinearModel:
    """Minimize (1/2n) sum (y - yhat)^2 + lam * sum |beta| by cyclic
    coordinate descent; converged when the largest coefficient change in a
    sweep falls below 1e-7."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    yc = y - y.mean()
    col_sq = (Xc**2).sum(axis=0) / n

    beta = np.zeros(p)
    resid = yc.copy()
    for sweep in range(LASSO_MAX_SWEEPS):
        max_delta = 0.0
        for j in range(p):
            if col_sq[j] == 0:
                continue
            rho = (Xc[:, j] @ resid) / n + col_sq[j] * beta[j]
            new = _soft_threshold(rho, lam) / col_sq[j]
            delta = new - beta[j]
            if delta != 0.0:
                resid -= Xc[:, j] * delta
                beta[j] = new
            max_delta = max(max_delta, abs(delta))
        if max_delta < LASSO_TOL:
            break
    else:
        raise ConvergenceError(
            f"lasso did not converge after {LASSO_MAX_SWEEPS} sweeps "
            f"(lam={lam}, n={n}, p={p}, last max delta={max_delta:.3e})"
        )
    return LinearModel(
        kind="lasso", coefficients=beta, intercept=float(y.mean()),
        penalty=float(lam), column_means=x_mean,
    )


def lasso_kkt_residuals(X: np.ndarray, y: np.ndarray, model: LinearModel) -> np.ndarray:
    """Per-coefficient KKT violations of the lasso stationarity conditions.

    0 everywhere (within tolerance) certifies optimality: |(1/n) Xj' r| <= lam
    for zero coefficients, and (1/n) Xj' r = lam * sign(beta_j) otherwise.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(y)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    resid = yc - Xc @ model.coefficients
    grad = Xc.T @ resid / n
    lam = model.penalty
    out = np.empty_like(grad)
    for j, b in enumerate(model.coefficients):
        if b == 0.0:
            out[j] = max(0.0, abs(grad[j]) - lam)
        else:
            out[j] = abs(grad[j] - lam * np.sign(b))
    return out
