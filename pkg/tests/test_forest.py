import json
import math
from fractions import Fraction

import numpy as np
import pytest

from traveltime.errors import DimensionMismatch, EmptySpace, EmptyTrainingSet, FormatError
from traveltime.evaluation import kfold_cv
from traveltime.forest import (
    ForestParams,
    RegressionForest,
    Tree,
    fit_forest,
    fit_tree,
    mdi_importance,
    predict_forest,
    predict_tree,
    random_search,
    sample_configurations,
)

from oracles import exhaustive_root_split


def leaf_tree(v, n=1):
    return Tree.from_dict({"leaf": {"value": v, "n": n}})


def test_constant_target_is_a_leaf():
    t = fit_tree([[1.0], [2.0], [3.0]], [5, 5, 5])
    assert t.to_dict() == {"leaf": {"value": 5.0, "n": 3}}


def test_two_point_split():
    t = fit_tree([[0.0], [1.0]], [0.0, 10.0])
    d = t.to_dict()["split"]
    assert (d["f"], d["t"]) == (0, 0.5)
    assert d["l"] == {"leaf": {"value": 0.0, "n": 1}}
    assert d["r"] == {"leaf": {"value": 10.0, "n": 1}}
    assert predict_tree(t, [0.4]) == 0.0
    assert predict_tree(t, [0.6]) == 10.0
    assert predict_tree(t, [0.5]) == 0.0  # x <= threshold goes left


def test_depth_zero_is_mean_leaf():
    t = fit_tree([[0.0], [1.0], [2.0]], [1.0, 2.0, 6.0], ForestParams(max_depth=0))
    assert t.to_dict() == {"leaf": {"value": 3.0, "n": 3}}


def test_leaf_prediction():
    assert predict_tree(leaf_tree(7.0), np.zeros(11)) == 7.0


def test_fit_errors():
    with pytest.raises(EmptyTrainingSet):
        fit_tree(np.empty((0, 2)), [])
    with pytest.raises(DimensionMismatch):
        fit_tree([[1.0], [2.0]], [1.0])
    with pytest.raises(ValueError):
        fit_tree([[np.nan]], [1.0])
    with pytest.raises(ValueError):
        ForestParams(min_samples_split=1)
    with pytest.raises(ValueError):
        fit_tree([[1.0], [2.0]], [1.0, 2.0], ForestParams(max_features=3))


def test_min_samples_split_stops_growth():
    X = [[0.0], [1.0], [2.0], [3.0]]
    y = [0.0, 1.0, 5.0, 9.0]
    t = fit_tree(X, y, ForestParams(min_samples_split=5))
    assert t.is_leaf()
    t = fit_tree(X, y, ForestParams(min_samples_split=3))
    # children of the root hold 2 rows each and may not split further
    assert t.n_nodes == 3


def test_root_split_matches_exhaustive_search():
    rng = np.random.default_rng(31)
    checked = 0
    for _ in range(400):
        n = int(rng.integers(2, 7))
        f = int(rng.integers(1, 3))
        X = rng.integers(0, 4, size=(n, f)).astype(float)
        y = rng.integers(0, 20, size=n).astype(float)
        best = exhaustive_root_split(X.tolist(), y.tolist())
        t = fit_tree(X, y)
        if best is None:
            assert t.is_leaf()
            continue
        _, feat, thr = best
        assert not t.is_leaf()
        assert (t.feature[0], Fraction(t.threshold[0])) == (feat, thr)
        checked += 1
    assert checked > 100


def test_interpolates_distinct_rows():
    rng = np.random.default_rng(0)
    X = rng.random((200, 3))
    y = rng.normal(size=200) * 50
    forest = fit_forest(X, y, ForestParams(n_trees=1, max_depth=32, bootstrap=False))
    assert np.mean((forest.predict(X) - y) ** 2) < 1e-9


def test_degenerate_forest_equals_single_tree():
    rng = np.random.default_rng(1)
    X = rng.random((120, 4))
    y = X @ [3.0, -1.0, 0.5, 2.0] + rng.normal(size=120)
    params = ForestParams(n_trees=1, bootstrap=False, max_depth=6)
    forest = fit_forest(X, y, params)
    tree = fit_tree(X, y, params)
    Xq = rng.random((50, 4))
    assert np.array_equal(forest.predict(Xq), tree.predict(Xq))


def test_depth_zero_forest_predicts_mean():
    rng = np.random.default_rng(2)
    X = rng.random((40, 3))
    y = rng.random(40) * 100
    forest = fit_forest(X, y, ForestParams(n_trees=5, max_depth=0, bootstrap=False))
    assert np.allclose(forest.predict(rng.random((9, 3))), y.mean(), atol=1e-12, rtol=0)


def test_forest_mean_of_trees():
    forest = RegressionForest(ForestParams(n_trees=2), [leaf_tree(10.0), leaf_tree(20.0)], ("a",))
    assert predict_forest(forest, [[0.0], [1.0]]).tolist() == [15.0, 15.0]
    same = RegressionForest(ForestParams(n_trees=3), [leaf_tree(4.0)] * 3, ("a",))
    assert predict_forest(same, [[0.3]]).tolist() == [4.0]
    assert predict_forest(same, np.empty((0, 1))).shape == (0,)
    with pytest.raises(DimensionMismatch):
        predict_forest(same, [[1.0, 2.0]])


def test_predictions_within_target_range_and_exact_mean():
    rng = np.random.default_rng(3)
    X = rng.random((300, 5))
    y = 100 * X[:, 0] + rng.normal(size=300) * 5
    forest = fit_forest(X, y, ForestParams(n_trees=20, max_depth=5, seed=4))
    Xq = rng.random((100, 5)) * 3 - 1
    pred = forest.predict(Xq)
    assert pred.min() >= y.min() and pred.max() <= y.max()
    per_tree = np.stack([t.predict(Xq) for t in forest.trees])
    assert np.all(np.isfinite(per_tree.var(axis=0)))
    exact = np.array([math.fsum(col) / len(col) for col in per_tree.T])
    assert np.allclose(pred, exact, rtol=1e-12, atol=0)


def test_determinism_and_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    X = rng.random((150, 11))
    y = 50 * X[:, 0] + 10 * X[:, 3] + rng.normal(size=150)
    params = ForestParams(n_trees=15, max_depth=4, max_features=5, seed=123)
    a = fit_forest(X, y, params)
    b = fit_forest(X, y, params)
    assert a.dumps() == b.dumps()
    assert fit_forest(X, y, ForestParams(n_trees=15, max_depth=4, max_features=5, seed=124)).dumps() != a.dumps()

    threaded = fit_forest(X, y, params, threads=4)
    assert threaded.dumps() == a.dumps()

    path = tmp_path / "model.json"
    a.save(path)
    loaded = RegressionForest.load(path)
    assert loaded.dumps() == a.dumps()
    assert np.array_equal(loaded.predict(X), a.predict(X))

    d = json.loads(path.read_text())
    assert d["format_version"] == 1
    assert d["params"]["n_trees"] == 15
    assert len(d["feature_names"]) == 11 and len(d["trees"]) == 15
    root = d["trees"][0]
    assert set(root) == {"split"} and {"f", "t", "l", "r"} <= set(root["split"])


def test_load_rejects_bad_files(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{not json")
    with pytest.raises(FormatError):
        RegressionForest.load(p)
    p.write_text(json.dumps({"format_version": 99}))
    with pytest.raises(FormatError):
        RegressionForest.load(p)
    p.write_text(json.dumps({"format_version": 1, "params": {}, "feature_names": ["a"], "trees": [{"bad": 1}]}))
    with pytest.raises(FormatError):
        RegressionForest.load(p)


def test_max_features_subsets_vary():
    rng = np.random.default_rng(6)
    X = rng.random((200, 6))
    y = X.sum(axis=1)
    full = fit_forest(X, y, ForestParams(n_trees=10, max_depth=3, seed=1))
    sub = fit_forest(X, y, ForestParams(n_trees=10, max_depth=3, max_features=1, seed=1))
    roots_full = {int(t.feature[0]) for t in full.trees}
    roots_sub = {int(t.feature[0]) for t in sub.trees}
    assert len(roots_sub) > len(roots_full) or roots_sub != roots_full


def test_mdi_single_feature():
    X = np.column_stack([np.arange(20.0), np.zeros(20)])
    y = np.arange(20.0) ** 2
    imp = mdi_importance(fit_forest(X, y, ForestParams(n_trees=3, seed=2)))
    assert imp.weights.tolist() == [1.0, 0.0]
    assert not imp.no_splits


def test_mdi_no_splits():
    X = np.random.default_rng(0).random((10, 2))
    imp = mdi_importance(fit_forest(X, np.full(10, 3.0), ForestParams(n_trees=2)))
    assert imp.no_splits and imp.weights.tolist() == [0.0, 0.0]


def test_mdi_matches_variance_formula():
    # one split on a hand-sized example: weight must equal the variance decrease
    X = [[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]]
    y = [1.0, 1.0, 5.0, 7.0]
    forest = fit_forest(X, y, ForestParams(n_trees=1, bootstrap=False, max_depth=1))
    root = forest.trees[0]
    n, var = len(y), np.var(y)
    left = [v for row, v in zip(X, y) if row[root.feature[0]] <= root.threshold[0]]
    right = [v for row, v in zip(X, y) if row[root.feature[0]] > root.threshold[0]]
    decrease = var - len(left) / n * np.var(left) - len(right) / n * np.var(right)
    assert root.gain[0] / n == pytest.approx(decrease)
    assert mdi_importance(forest).weights[root.feature[0]] == 1.0


def test_sample_configurations():
    space = {"max_depth": [2, 4, 6], "n_trees": [5, 10]}
    a = sample_configurations(space, 4, seed=1)
    assert a == sample_configurations(space, 4, seed=1)
    assert len(a) == 4 and len({tuple(c.items()) for c in a}) == 4
    assert len(sample_configurations(space, 100, seed=1)) == 6
    with pytest.raises(EmptySpace):
        sample_configurations({"max_depth": []}, 1, 0)
    with pytest.raises(EmptySpace):
        sample_configurations({}, 1, 0)


def _search_data():
    rng = np.random.default_rng(7)
    X = rng.random((60, 3))
    y = 40 * X[:, 0] + 5 * X[:, 1] + rng.normal(size=60)
    return X, y


def test_random_search_budget_one():
    X, y = _search_data()
    space = {"max_depth": [1, 3], "n_trees": [3]}
    res = random_search(X, y, space, budget=1, folds=3, seed=5)
    [cfg] = sample_configurations(space, 1, seed=5)
    assert len(res.trials) == 1
    assert res.best_params.max_depth == cfg["max_depth"]
    expected = np.mean(kfold_cv(X, y, res.best_params, 3, 5))
    assert res.best_mae == pytest.approx(expected, rel=0, abs=0)


def test_random_search_exhaustive_picks_argmin():
    X, y = _search_data()
    space = {"max_depth": [0, 4], "n_trees": [4]}
    res = random_search(X, y, space, budget=2, folds=3, seed=2)
    direct = {
        d: np.mean(kfold_cv(X, y, ForestParams(max_depth=d, n_trees=4), 3, 2)) for d in (0, 4)
    }
    best_depth = min(direct, key=direct.get)
    assert res.best_params.max_depth == best_depth
    assert res.best_mae == direct[best_depth]
    again = random_search(X, y, space, budget=2, folds=3, seed=2)
    assert [p for p, _ in again.trials] == [p for p, _ in res.trials]
