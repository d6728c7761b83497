import numpy as np
import pytest

from fundlens.interpret import (
    inclusion_proportions,
    null_importance_test,
    partial_dependence,
    pdp_grid,
    pseudo_r2,
)
from fundlens.models.bart import BARTParams, fit_bart
from fundlens.models.gbt import GBTParams, fit_gbt
from fundlens.synthetic import additive_model_data
from fundlens.table import FeatureTable


def make_table(values, outcome, columns=None, tag="baseline"):
    columns = columns or [f"c{i}" for i in range(values.shape[1])]
    return FeatureTable(
        ids=[f"r{i}" for i in range(len(outcome))],
        columns=columns,
        values=np.asarray(values, dtype=float),
        outcome=np.asarray(outcome, dtype=float),
        tags={c: tag for c in columns},
        categories={c: tag for c in columns},
    )


class TestPseudoR2:
    def test_perfect(self):
        y = np.arange(10.0)
        assert pseudo_r2(y, y) == 1.0

    def test_mean_prediction_zero(self):
        y = np.arange(10.0)
        assert pseudo_r2(y, np.full(10, y.mean())) == pytest.approx(0.0)

    def test_worse_than_mean_negative(self):
        y = np.arange(10.0)
        assert pseudo_r2(y, y[::-1]) < 0.0

    def test_consistency_with_evaluate(self):
        from fundlens.models.cv import evaluate

        rng = np.random.default_rng(0)
        y = rng.normal(0, 2, 50)
        pred = y + rng.normal(0, 1, 50)
        report = evaluate(y, pred, "out-of-sample")
        sst = float(np.sum((y - y.mean()) ** 2))
        assert pseudo_r2(y, pred) == pytest.approx(1 - report.rmse**2 * len(y) / sst)


class TestInclusionProportions:
    def test_single_variable_gets_all_splits(self):
        rng = np.random.default_rng(1)
        X = rng.random((80, 1))
        y = np.sin(X[:, 0] * 8)
        model = fit_bart(X, y, BARTParams(m=10, n_burn=40, n_post=60), seed=0)
        report = inclusion_proportions(model, ["only"], n_replicates=1)
        assert report.variables[0].proportion == pytest.approx(1.0)
        assert not report.has_intervals

    def test_proportions_sum_to_one(self):
        rng = np.random.default_rng(2)
        X = rng.random((100, 4))
        y = X[:, 0] * 2 + X[:, 1] + rng.normal(0, 0.1, 100)
        model = fit_bart(X, y, BARTParams(m=15, n_burn=40, n_post=60), seed=1)
        report = inclusion_proportions(model, list("abcd"), n_replicates=1)
        total = sum(v.proportion for v in report.variables)
        assert total == pytest.approx(1.0)

    def test_replicate_intervals_and_significance(self):
        rng = np.random.default_rng(3)
        X = rng.random((90, 3))
        y = 4 * X[:, 0] + rng.normal(0, 0.2, 90)
        model = fit_bart(X, y, BARTParams(m=10, n_burn=30, n_post=50), seed=2)
        report = inclusion_proportions(model, list("xyz"), n_replicates=3)
        assert report.has_intervals
        v0 = report.variables[0]
        assert v0.lower <= v0.proportion <= v0.upper
        assert v0.significant  # the only signal variable dominates splits

    def test_category_grouping(self):
        rng = np.random.default_rng(4)
        X = rng.random((80, 2))
        y = X[:, 0] + rng.normal(0, 0.1, 80)
        model = fit_bart(X, y, BARTParams(m=8, n_burn=30, n_post=40), seed=3)
        report = inclusion_proportions(
            model, ["a", "b"], categories={"a": "signal", "b": "noise"},
            n_replicates=2,
        )
        cats = {c.category for c in report.categories}
        assert cats == {"signal", "noise"}


class TestNullImportance:
    def _tables(self, seed=0, n=200):
        rng = np.random.default_rng(seed)
        X = rng.normal(0, 1, (n, 3))
        y = 2.0 * X[:, 0] + rng.normal(0, 0.3, n)
        cols = ["signal", "noise1", "noise2"]
        t = make_table(X, y, cols)
        train = t.select_rows(np.arange(0, int(0.8 * n)))
        test = t.select_rows(np.arange(int(0.8 * n), n))
        return train, test

    def test_removing_signal_hurts(self):
        train, test = self._tables()
        frac = null_importance_test(
            train, test, ["signal"], n_resamples=20, learner="gbt", seed=5
        )
        assert frac >= 0.95

    def test_removing_noise_near_half(self):
        train, test = self._tables(seed=1)
        frac = null_importance_test(
            train, test, ["noise1", "noise2"], n_resamples=20, learner="gbt", seed=6
        )
        assert 0.2 <= frac <= 0.8

    def test_single_resample_binary(self):
        train, test = self._tables(seed=2)
        frac = null_importance_test(
            train, test, ["noise1"], n_resamples=1, learner="gbt", seed=7
        )
        assert frac in (0.0, 1.0)

    def test_bart_learner_wired(self):
        train, test = self._tables(seed=3, n=80)
        frac = null_importance_test(
            train, test, ["signal"], n_resamples=2, learner="bart", seed=8
        )
        assert 0.0 <= frac <= 1.0

    def test_validation(self):
        train, test = self._tables()
        with pytest.raises(ValueError):
            null_importance_test(train, test, [], learner="gbt")
        with pytest.raises(ValueError):
            null_importance_test(train, test, ["nope"], learner="gbt")
        with pytest.raises(ValueError):
            null_importance_test(
                train, test, ["signal", "noise1", "noise2"], learner="gbt"
            )

    def test_seed_deterministic(self):
        train, test = self._tables(seed=4)
        f1 = null_importance_test(train, test, ["signal"], n_resamples=5,
                                  learner="gbt", seed=9)
        f2 = null_importance_test(train, test, ["signal"], n_resamples=5,
                                  learner="gbt", seed=9)
        assert f1 == f2


class TestPartialDependence:
    def test_constant_model_flat_curve(self):
        rng = np.random.default_rng(5)
        X = rng.random((60, 2))
        y = np.full(60, 3.3)
        model = fit_gbt(X, y, GBTParams(n_rounds=5))
        curve = partial_dependence(model, X, 0)
        assert np.allclose(curve.effects, 3.3)

    def test_quintile_grid_has_five_points(self):
        rng = np.random.default_rng(6)
        values = rng.normal(0, 1, 500)
        grid = pdp_grid(values)
        assert len(grid) == 5
        assert np.all(np.diff(grid) > 0)

    def test_discrete_variable_uses_observed_support(self):
        values = np.array([0.0, 1.0, 2.0, 1.0, 0.0, 2.0, 1.0])
        assert np.array_equal(pdp_grid(values), [0.0, 1.0, 2.0])

    def test_constant_variable_single_point_flagged(self):
        rng = np.random.default_rng(7)
        X = rng.random((50, 2))
        X[:, 1] = 2.0
        y = X[:, 0]
        model = fit_gbt(X, y, GBTParams(n_rounds=10))
        curve = partial_dependence(model, X, 1)
        assert curve.single_point
        assert len(curve.grid) == 1

    @pytest.mark.slow
    def test_additive_recovery(self):
        X, y, g1, g2 = additive_model_data(n=500, seed=8)
        model = fit_bart(X, y, BARTParams(m=40, n_burn=150, n_post=200), seed=4)
        curve = partial_dependence(model, X, 0)
        truth = g1(curve.grid)
        corr = np.corrcoef(curve.effects, truth)[0, 1]
        assert corr >= 0.95
        assert curve.lower is not None
        assert np.all(curve.lower <= curve.effects)
        assert np.all(curve.effects <= curve.upper)

    def test_absent_variable_exactly_flat(self):
        rng = np.random.default_rng(9)
        X = rng.random((80, 3))
        y = 5.0 * X[:, 0]  # only column 0 carries signal
        model = fit_gbt(X, y, GBTParams(eta=1.0, max_depth=2, n_rounds=10))
        used = {  # features actually split on
            n.feature
            for t in model.trees
            for n in _walk(t)
            if n.feature is not None
        }
        for j in range(3):
            if j in used:
                continue
            curve = partial_dependence(model, X, j)
            assert np.ptp(curve.effects) == 0.0


def _walk(node):
    yield node
    if not node.is_leaf:
        yield from _walk(node.left)
        yield from _walk(node.right)
