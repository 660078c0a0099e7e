"""Regression trees and bootstrap random forests, with MDI importance and random search.

Tree ``t`` of a forest seeded with ``s`` draws its bootstrap rows, then its
per-node feature subsets, from ``default_rng(derive_seed(s, t))``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import _cart
from .errors import DimensionMismatch, EmptySpace, EmptyTrainingSet, FormatError
from .features import FEATURE_NAMES
from .seeding import derive_seed

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 400
    max_depth: int = 10
    min_samples_split: int = 2
    max_features: int | None = None  # None = every column
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")

    def resolved_max_features(self, n_features: int) -> int:
        if self.max_features is None:
            return n_features
        if self.max_features > n_features:
            raise ValueError(f"max_features={self.max_features} exceeds {n_features} columns")
        return self.max_features


@dataclass
class Tree:
    """Array-backed regression tree. Node 0 is the root; ``feature == -1`` marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int = 0) -> bool:
        return self.feature[node] == _cart.LEAF

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _cart.predict_rows(
            self.feature, self.threshold, self.left, self.right, self.value, X
        )

    def to_dict(self) -> dict[str, Any]:
        feat, thr, left, right = (a.tolist() for a in (self.feature, self.threshold, self.left, self.right))
        val, n, gain = self.value.tolist(), self.n_samples.tolist(), self.gain.tolist()

        def build(i: int) -> dict[str, Any]:
            if feat[i] == _cart.LEAF:
                return {"leaf": {"value": val[i], "n": n[i]}}
            return {
                "split": {
                    "f": feat[i], "t": thr[i], "n": n[i], "g": gain[i],
                    "l": build(left[i]), "r": build(right[i]),
                }
            }

        return build(0)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Tree":
        rows: list[list[float]] = []

        def visit(obj: Mapping[str, Any]) -> tuple[int, int]:
            nid = len(rows)
            rows.append([])
            if "leaf" in obj:
                leaf = obj["leaf"]
                n = int(leaf["n"])
                rows[nid] = [_cart.LEAF, 0.0, _cart.LEAF, _cart.LEAF, float(leaf["value"]), n, 0.0]
                return nid, n
            sp = obj["split"]
            lid, nl = visit(sp["l"])
            rid, nr = visit(sp["r"])
            n = int(sp.get("n", nl + nr))
            rows[nid] = [int(sp["f"]), float(sp["t"]), lid, rid, 0.0, n, float(sp.get("g", 0.0))]
            return nid, n

        try:
            visit(d)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed tree node: {exc}") from None
        cols = list(zip(*rows))
        ints = lambda c: np.asarray(c, dtype=np.int64)
        flts = lambda c: np.asarray(c, dtype=np.float64)
        return cls(ints(cols[0]), flts(cols[1]), ints(cols[2]), ints(cols[3]),
                   flts(cols[4]), ints(cols[5]), flts(cols[6]))


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
    if len(y) == 0 or X.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    if y.ndim != 1 or X.shape[0] != len(y):
        raise DimensionMismatch(f"X has {X.shape[0]} rows but y has shape {y.shape}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("training data must be finite")
    return X, y


def _grow(X: np.ndarray, y: np.ndarray, params: ForestParams, rng: np.random.Generator) -> Tree:
    n_feat = X.shape[1]
    mf = params.resolved_max_features(n_feat)
    if mf < n_feat:
        keys = rng.random((2 * len(y) + 1, n_feat))
    else:
        keys = np.empty((0, n_feat))
    return Tree(*_cart.grow_tree(X, y, params.max_depth, params.min_samples_split, mf, keys))


def fit_tree(X, y, params: ForestParams = ForestParams(), rng: np.random.Generator | None = None) -> Tree:
    """Grow a single CART regression tree on all rows (no bootstrap)."""
    X, y = _check_xy(X, y)
    if rng is None:
        rng = np.random.default_rng(params.seed)
    return _grow(X, y, params, rng)


@dataclass
class RegressionForest:
    params: ForestParams
    trees: list[Tree]
    feature_names: tuple[str, ...] = FEATURE_NAMES

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, X) -> np.ndarray:
        return predict_forest(self, X)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "params": asdict(self.params),
            "feature_names": list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RegressionForest":
        if d.get("format_version") != FORMAT_VERSION:
            raise FormatError(f"unsupported model format_version {d.get('format_version')!r}")
        try:
            params = ForestParams(**d["params"])
            names = tuple(d["feature_names"])
            trees = [Tree.from_dict(t) for t in d["trees"]]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed model: {exc}") from None
        return cls(params, trees, names)

    @classmethod
    def load(cls, path: str | Path) -> "RegressionForest":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from None
        try:
            return cls.from_dict(d)
        except FormatError as exc:
            raise FormatError(f"{path}: {exc}") from None


def fit_forest(
    X,
    y,
    params: ForestParams = ForestParams(),
    feature_names: Sequence[str] | None = None,
    threads: int = 1,
) -> RegressionForest:
    """Fit ``params.n_trees`` trees, each on a bootstrap resample (or all rows).

    Trees may be grown on a thread pool (the kernel releases the GIL); the
    ensemble is always assembled in tree-index order.
    """
    X, y = _check_xy(X, y)
    if feature_names is None:
        feature_names = FEATURE_NAMES if X.shape[1] == len(FEATURE_NAMES) else tuple(
            f"x{i}" for i in range(X.shape[1])
        )
    if len(feature_names) != X.shape[1]:
        raise DimensionMismatch(f"{len(feature_names)} feature names for {X.shape[1]} columns")
    params.resolved_max_features(X.shape[1])
    n = len(y)

    def one(t: int) -> Tree:
        rng = np.random.default_rng(derive_seed(params.seed, t))
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
            return _grow(X[rows], y[rows], params, rng)
        return _grow(X, y, params, rng)

    if threads == 1:
        trees = [one(t) for t in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as ex:
            trees = list(ex.map(one, range(params.n_trees)))
    return RegressionForest(params, trees, tuple(feature_names))


def predict_tree(tree: Tree, x) -> float:
    return float(tree.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def predict_forest(forest: RegressionForest, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return np.empty(0)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != forest.n_features:
        raise DimensionMismatch(f"rows have {X.shape[1]} entries, model expects {forest.n_features}")
    X = np.ascontiguousarray(X)
    total = np.zeros(X.shape[0])
    for tree in forest.trees:
        total += tree.predict(X)
    return total / len(forest.trees)


@dataclass(frozen=True)
class Importance:
    weights: np.ndarray
    no_splits: bool = False


def mdi_importance(forest: RegressionForest) -> Importance:
    """Mean decrease in impurity per feature, normalised to sum to 1.

    A split's contribution is its SSE decrease divided by the tree's root
    sample count, i.e. (n_node/n_root) times the variance decrease.
    """
    acc = np.zeros(forest.n_features)
    for tree in forest.trees:
        n_root = tree.n_samples[0]
        for node in np.flatnonzero(tree.feature != _cart.LEAF):
            acc[tree.feature[node]] += tree.gain[node] / n_root
    acc /= len(forest.trees)
    total = acc.sum()
    if total <= 0:
        return Importance(np.zeros(forest.n_features), no_splits=True)
    return Importance(acc / total)


def sample_configurations(
    space: Mapping[str, Sequence[Any]], budget: int, seed: int
) -> list[dict[str, Any]]:
    """Draw up to ``budget`` distinct configurations uniformly from the grid ``space``."""
    if not space or any(len(v) == 0 for v in space.values()):
        raise EmptySpace("every searched parameter needs at least one candidate")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    names = sorted(space)
    sizes = [len(space[k]) for k in names]
    total = math.prod(sizes)
    rng = np.random.default_rng(seed)
    picks = rng.permutation(total)[: min(budget, total)]
    configs = []
    for flat in picks:
        cfg = {}
        for name, size in zip(reversed(names), reversed(sizes)):
            flat, i = divmod(int(flat), size)
            cfg[name] = space[name][i]
        configs.append({k: cfg[k] for k in names})
    return configs


@dataclass
class SearchResult:
    best_params: ForestParams
    best_mae: float
    trials: list[tuple[ForestParams, float]] = field(default_factory=list)


def random_search(
    X,
    y,
    space: Mapping[str, Sequence[Any]],
    budget: int,
    folds: int = 5,
    seed: int = 0,
    base: ForestParams = ForestParams(),
) -> SearchResult:
    """Randomised grid search minimising mean k-fold CV MAE; ties keep the first sampled."""
    from .evaluation import kfold_cv

    if folds < 2:
        raise ValueError("folds must be >= 2")
    best: tuple[ForestParams, float] | None = None
    trials = []
    for cfg in sample_configurations(space, budget, seed):
        params = replace(base, **cfg)
        mae = float(np.mean(kfold_cv(X, y, params, folds, seed)))
        trials.append((params, mae))
        if best is None or mae < best[1]:
            best = (params, mae)
    assert best is not None
    return SearchResult(best[0], best[1], trials)
