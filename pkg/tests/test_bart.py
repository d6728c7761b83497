import numpy as np
import pytest

from fundlens.models.bart import BARTParams, fit_bart
from fundlens.models.linear import (
    fit_lasso,
    lasso_lambda_max,
    standardize_apply,
    standardize_fit,
)
from fundlens.synthetic import friedman1

SMALL = BARTParams(m=20, n_burn=80, n_post=120)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            BARTParams(m=0)
        with pytest.raises(ValueError):
            BARTParams(q=1.5)
        with pytest.raises(ValueError):
            BARTParams(alpha=1.2)


class TestFit:
    def test_constant_outcome(self):
        rng = np.random.default_rng(0)
        X = rng.random((60, 3))
        y = np.full(60, 2.5)
        model = fit_bart(X, y, BARTParams(m=10, n_burn=40, n_post=60), seed=0)
        pred = model.predict(X)
        draws = model.predict_draws(X)
        se = draws.mean(axis=1).std() / np.sqrt(model.n_draws)
        assert np.all(np.abs(pred - 2.5) <= max(2 * se, 1e-9) + 1e-9)

    def test_sigma_draws_positive_predictions_finite(self):
        rng = np.random.default_rng(1)
        X = rng.random((80, 4))
        y = X[:, 0] * 3 + rng.normal(0, 0.2, 80)
        model = fit_bart(X, y, SMALL, seed=3)
        assert (model.sigma_draws > 0).all()
        assert np.isfinite(model.predict(X)).all()

    def test_bit_reproducible(self):
        rng = np.random.default_rng(2)
        X = rng.random((50, 3))
        y = np.sin(X[:, 0] * 6) + rng.normal(0, 0.1, 50)
        m1 = fit_bart(X, y, SMALL, seed=11)
        m2 = fit_bart(X, y, SMALL, seed=11)
        assert np.array_equal(m1.sigma_draws, m2.sigma_draws)
        assert np.array_equal(m1.split_counts, m2.split_counts)
        assert np.array_equal(m1.predict(X), m2.predict(X))

    def test_step_function_recovered(self):
        X = np.linspace(0, 1, 100).reshape(-1, 1)
        y = (X[:, 0] > 0.5) * 4.0
        model = fit_bart(X, y, SMALL, seed=0)
        assert np.sqrt(np.mean((model.predict(X) - y) ** 2)) < 0.3

    def test_missing_values_handled(self):
        rng = np.random.default_rng(4)
        X = rng.random((120, 3))
        X[rng.random(120) < 0.2, 0] = np.nan
        y = np.where(np.isnan(X[:, 0]), 3.0, X[:, 0])
        model = fit_bart(X, y, SMALL, seed=5)
        assert np.isfinite(model.predict(X)).all()


@pytest.mark.slow
class TestFriedman:
    def test_beats_lasso_and_ranks_signal_variables(self):
        X, y = friedman1(500, seed=42)
        train, test = np.arange(400), np.arange(400, 500)
        model = fit_bart(
            X[train], y[train], BARTParams(m=50, n_burn=250, n_post=500), seed=1
        )
        bart_rmse = np.sqrt(np.mean((model.predict(X[test]) - y[test]) ** 2))

        cols = [f"x{i}" for i in range(10)]
        sp = standardize_fit(X[train], cols)
        Ztr = standardize_apply(sp, X[train], cols)
        Zte = standardize_apply(sp, X[test], cols)
        lam = 0.01 * lasso_lambda_max(Ztr, y[train])
        lasso = fit_lasso(Ztr, y[train], lam)
        lasso_rmse = np.sqrt(np.mean((lasso.predict(Zte) - y[test]) ** 2))

        assert bart_rmse < lasso_rmse

        prop = model.split_counts.sum(axis=0).astype(float)
        prop /= prop.sum()
        assert prop[:5].min() > prop[5:].max()
