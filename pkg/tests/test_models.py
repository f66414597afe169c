import numpy as np
import pytest

from wstress import (
    CLASSIFICATION,
    REGRESSION,
    EmpiricalDataset,
    fit_naive_bayes,
    fit_tree,
    predict,
    threshold_model,
)
from wstress.models import GE, LT, ModelError


def training_ds(X, y, names=None):
    X = np.asarray(X, dtype=float)
    names = names or [f"f{i}" for i in range(X.shape[1])]
    return EmpiricalDataset(
        np.column_stack([X, y]), tuple(names) + ("target",)
    )


class TestTree:
    def test_constant_target_predicts_constant(self):
        ds = training_ds(np.arange(8.0).reshape(4, 2), [1.0, 1.0, 1.0, 1.0])
        model = fit_tree(ds, "target", CLASSIFICATION, max_depth=3, min_leaf=1)
        assert np.all(model.predict(np.zeros((5, 2))) == 1.0)

    def test_depth_one_recovers_separator(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-2, 2, size=(100, 1))
        y = (x[:, 0] >= 0).astype(float)
        ds = training_ds(x, y)
        model = fit_tree(ds, "target", CLASSIFICATION, max_depth=1, min_leaf=1)
        assert np.array_equal(model.predict(x), y)  # training accuracy 1.0

    def test_depth_zero_majority_with_tie_to_zero(self):
        ds = training_ds(np.arange(8.0).reshape(4, 2), [0.0, 1.0, 1.0, 0.0])
        model = fit_tree(ds, "target", CLASSIFICATION, max_depth=0, min_leaf=1)
        assert np.all(model.predict(np.ones((3, 2))) == 0.0)

    def test_regression_steps(self):
        x = np.arange(12.0).reshape(-1, 1)
        y = np.where(x[:, 0] < 6, 1.0, 5.0)
        ds = training_ds(x, y)
        model = fit_tree(ds, "target", REGRESSION, max_depth=2, min_leaf=1)
        assert model.predict([[0.0]]) == pytest.approx([1.0])
        assert model.predict([[11.0]]) == pytest.approx([5.0])

    def test_min_leaf_respected(self):
        x = np.arange(6.0).reshape(-1, 1)
        y = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        ds = training_ds(x, y)
        # a split isolating the single positive row is forbidden at min_leaf=2
        model = fit_tree(ds, "target", CLASSIFICATION, max_depth=3, min_leaf=2)
        assert np.all(model.predict([[5.0]]) == model.predict([[4.0]]))

    def test_single_row_rejected(self):
        ds = training_ds([[1.0]], [0.0])
        with pytest.raises(ModelError, match="single row"):
            fit_tree(ds, "target", CLASSIFICATION, max_depth=2, min_leaf=1)

    def test_non_binary_classification_target_rejected(self):
        ds = training_ds([[1.0], [2.0]], [0.0, 2.0])
        with pytest.raises(ModelError, match="0, 1"):
            fit_tree(ds, "target", CLASSIFICATION, max_depth=2, min_leaf=1)

    def test_deterministic_refit(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(60, 3))
        y = (x[:, 0] + 0.2 * x[:, 1] > 0).astype(float)
        ds = training_ds(x, y)
        q = rng.normal(size=(40, 3))
        a = fit_tree(ds, "target", CLASSIFICATION, max_depth=4, min_leaf=2).predict(q)
        b = fit_tree(ds, "target", CLASSIFICATION, max_depth=4, min_leaf=2).predict(q)
        assert np.array_equal(a, b)

    def test_monotone_rescaling_invariance_at_train_points(self):
        # monotone per-feature transforms preserve split order, so
        # predictions at (transformed) training points are identical
        rng = np.random.default_rng(3)
        x = rng.uniform(0.5, 3.0, size=(80, 2))
        y = ((x[:, 0] - 1.5) + 0.5 * (x[:, 1] - 2.0) > 0).astype(float)
        transforms = (lambda v: v**3, lambda v: np.exp(v))
        base = fit_tree(training_ds(x, y), "target", CLASSIFICATION, 3, 1)
        tx = np.column_stack([transforms[j](x[:, j]) for j in range(2)])
        rescaled = fit_tree(training_ds(tx, y), "target", CLASSIFICATION, 3, 1)
        assert np.array_equal(base.predict(x), rescaled.predict(tx))


class TestNaiveBayes:
    def test_symmetric_gaussians_split_at_midpoint(self):
        rng = np.random.default_rng(1)
        x0 = rng.normal(-2.0, 1.0, 300)
        x1 = rng.normal(2.0, 1.0, 300)
        ds = training_ds(
            np.concatenate([x0, x1]).reshape(-1, 1),
            np.concatenate([np.zeros(300), np.ones(300)]),
        )
        model = fit_naive_bayes(ds, "target")
        # equal priors and variances put the boundary at the midpoint 0
        assert model.predict([[-0.5]]) == pytest.approx([0.0])
        assert model.predict([[0.5]]) == pytest.approx([1.0])

    def test_constant_feature_falls_back_to_prior(self):
        ds = training_ds(
            np.column_stack([np.ones(10), np.ones(10)]),
            np.array([0.0] * 3 + [1.0] * 7),
        )
        model = fit_naive_bayes(ds, "target")
        assert np.all(model.predict(np.ones((4, 2))) == 1.0)  # majority prior

    def test_single_row_per_class_defined(self):
        ds = training_ds([[0.0], [1.0]], [0.0, 1.0])
        model = fit_naive_bayes(ds, "target")
        assert model.predict([[0.0]]) == pytest.approx([0.0])
        assert model.predict([[1.0]]) == pytest.approx([1.0])

    def test_missing_class_rejected(self):
        ds = training_ds([[0.0], [1.0]], [1.0, 1.0])
        with pytest.raises(ModelError, match="class 0"):
            fit_naive_bayes(ds, "target")

    def test_affine_rescaling_invariance(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(100, 2))
        y = (x[:, 0] > 0.2).astype(float)
        base = fit_naive_bayes(training_ds(x, y), "target")
        scaled = fit_naive_bayes(training_ds(x * [3.0, 0.5] + [1.0, -2.0], y), "target")
        q = rng.normal(size=(50, 2))
        assert np.array_equal(base.predict(q), scaled.predict(q * [3.0, 0.5] + [1.0, -2.0]))


class TestThreshold:
    def test_basic_indicator(self):
        model = threshold_model(0, 0.0)
        assert model.predict([[1.0, 9.9]]) == pytest.approx([1.0])

    def test_cut_above_max_predicts_zero(self):
        model = threshold_model(0, 100.0)
        assert np.all(model.predict(np.random.default_rng(0).normal(size=(20, 1))) == 0.0)

    def test_directions_are_complementary(self):
        rows = np.linspace(-2, 2, 9).reshape(-1, 1)
        ge = threshold_model(0, 0.5, GE).predict(rows)
        lt = threshold_model(0, 0.5, LT).predict(rows)
        assert np.array_equal(ge + lt, np.ones(9))

    def test_bad_direction_rejected(self):
        with pytest.raises(ModelError):
            threshold_model(0, 0.0, "up")


class TestPredict:
    def test_empty_batch(self):
        model = threshold_model(0, 0.0, feature_names=("x",))
        assert predict(model, np.empty((0, 1))).shape == (0,)
        assert predict(model, []).shape == (0,)

    def test_arity_mismatch_rejected(self):
        model = threshold_model(0, 0.0, feature_names=("x", "y"))
        with pytest.raises(ModelError, match="feature columns"):
            predict(model, np.ones((3, 5)))

    def test_repeatable_batches(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(50, 2))
        y = (x[:, 0] > 0).astype(float)
        model = fit_naive_bayes(training_ds(x, y), "target")
        rows = rng.normal(size=(30, 2))
        assert np.array_equal(predict(model, rows), predict(model, rows))
