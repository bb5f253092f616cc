import numpy as np
import pytest

from shipfuel.models import ForestRegressor, RegressionTree, best_split, load_model, \
    save_model


def exhaustive_split_oracle(X, y):
    """O(n^2 p) enumeration of every midpoint split; returns (feature, threshold, gain)."""
    n, p = X.shape
    sse = lambda v: float(((v - v.mean()) ** 2).sum()) if v.size else 0.0
    total = sse(y)
    best = None
    for j in range(p):
        xs = np.sort(np.unique(X[:, j]))
        for a, b in zip(xs[:-1], xs[1:]):
            thr = (a + b) / 2.0
            if thr >= b:
                thr = a
            mask = X[:, j] <= thr
            gain = total - sse(y[mask]) - sse(y[~mask])
            if best is None or gain > best[2]:
                best = (j, thr, gain)
    return best


class TestSplitFinder:
    def test_two_point_midpoint(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([1.0, 3.0])
        feature, threshold, gain = best_split(X, y, [0])
        assert (feature, threshold) == (0, 0.5)
        assert gain == pytest.approx(2.0)   # SSE drops from 2 to 0

    def test_agrees_with_exhaustive_enumeration(self, rng):
        for _ in range(50):
            n = int(rng.integers(4, 65))
            p = int(rng.integers(1, 6))
            X = rng.normal(size=(n, p))
            y = rng.normal(size=n)
            got = best_split(X, y, np.arange(p))
            want = exhaustive_split_oracle(X, y)
            assert got is not None
            assert got[0] == want[0]
            assert got[1] == want[1]
            assert got[2] == pytest.approx(want[2], rel=1e-9, abs=1e-9)

    def test_constant_target_no_split(self):
        X = np.array([[0.0], [1.0], [2.0]])
        assert best_split(X, np.ones(3), [0]) is None

    def test_min_samples_leaf_respected(self):
        X = np.arange(10, dtype=float).reshape(-1, 1)
        y = np.array([0.0] * 1 + [5.0] * 9)
        found = best_split(X, y, [0], min_samples_leaf=3)
        assert found is not None
        mask = X[:, 0] <= found[1]
        assert mask.sum() >= 3 and (~mask).sum() >= 3


class TestForest:
    def test_single_tree_memorizes_distinct_rows(self, rng):
        X = rng.normal(size=(40, 3))
        y = rng.normal(size=40)
        model = ForestRegressor(n_trees=1, bootstrap=False, seed=0).fit(X, y)
        assert np.allclose(model.predict(X), y)

    def test_constant_target(self, rng):
        X = rng.normal(size=(30, 2))
        y = np.full(30, 4.2)
        model = ForestRegressor(n_trees=7, seed=0).fit(X, y)
        assert np.allclose(model.predict(X), 4.2)

    def test_prediction_is_convex_combination_of_trees(self, rng):
        X = rng.normal(size=(60, 4))
        y = X[:, 0] ** 2 + rng.normal(size=60)
        model = ForestRegressor(n_trees=9, seed=3).fit(X, y)
        per_tree = np.stack([t.predict(X) for t in model.trees_])
        pred = model.predict(X)
        assert np.all(pred >= per_tree.min(axis=0) - 1e-12)
        assert np.all(pred <= per_tree.max(axis=0) + 1e-12)
        assert np.allclose(pred, per_tree.mean(axis=0))

    def test_two_tree_mean(self):
        t1 = RegressionTree().fit(np.array([[0.0]]), np.array([2.0]))
        t2 = RegressionTree().fit(np.array([[0.0]]), np.array([4.0]))
        model = ForestRegressor(n_trees=2, seed=0)
        model.trees_ = [t1, t2]
        model.n_features_in_ = 1
        assert model.predict([[0.0]])[0] == pytest.approx(3.0)

    def test_seed_reproducibility(self, rng):
        X = rng.normal(size=(50, 3))
        y = rng.normal(size=50)
        a = ForestRegressor(n_trees=11, seed=42).fit(X, y).predict(X)
        b = ForestRegressor(n_trees=11, seed=42).fit(X, y).predict(X)
        c = ForestRegressor(n_trees=11, seed=43).fit(X, y).predict(X)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_feature_subset_fraction(self, rng):
        X = rng.normal(size=(80, 6))
        y = X.sum(axis=1)
        model = ForestRegressor(n_trees=5, features_per_split=0.5, seed=1).fit(X, y)
        assert len(model.trees_) == 5

    def test_serialization_round_trip(self, tmp_path, rng):
        X = rng.normal(size=(30, 3))
        y = rng.normal(size=30)
        model = ForestRegressor(n_trees=3, seed=5).fit(X, y)
        path = tmp_path / "forest.json"
        save_model(model, path)
        back = load_model(path)
        assert np.array_equal(back.predict(X), model.predict(X))
        assert np.allclose(back.feature_importances(), model.feature_importances())


class TestImportance:
    def test_single_informative_feature_dominates(self, rng):
        n = 200
        X = rng.normal(size=(n, 4))
        y = X[:, 0].copy()   # other columns are pure noise
        model = ForestRegressor(n_trees=30, seed=2).fit(X, y)
        imp = model.feature_importances()
        assert imp[0] > 0.9

    def test_normalized_to_one(self, rng):
        X = rng.normal(size=(100, 5))
        y = X @ rng.normal(size=5) + rng.normal(size=100)
        imp = ForestRegressor(n_trees=10, seed=7).fit(X, y).feature_importances()
        assert imp.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(imp >= 0)

    def test_stump_importance_is_one(self):
        X = np.array([[0.0, 5.0], [1.0, 5.0]])
        y = np.array([0.0, 1.0])
        model = ForestRegressor(n_trees=1, max_depth=1, bootstrap=False, seed=0).fit(X, y)
        imp = model.feature_importances()
        assert imp[0] == pytest.approx(1.0)
        assert imp[1] == 0.0
