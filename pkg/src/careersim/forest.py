"""Random forests on numeric features: a binary classifier and a regressor.

Trees are grown CART-style on bootstrap resamples with per-split feature
subsampling. Classification splits minimize Gini impurity, regression splits
minimize within-node squared error. Leaves store the positive-label fraction
(classifier) or the mean target (regressor), and the ensemble prediction is
the plain mean over trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ForestParams",
    "DecisionTree",
    "ForestClassifier",
    "ForestRegressor",
    "fit_classifier",
    "fit_regressor",
    "predict_proba",
    "predict_proba_batch",
    "predict_value",
    "predict_value_batch",
]

_LEAF = -1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 5
    # None picks ceil(sqrt(d)) for classification, ceil(d/3) for regression.
    features_per_split: int | None = None
    bootstrap: bool = True
    seed: int = 0

    def validate(self, n_features: int) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.features_per_split is not None and not (
            1 <= self.features_per_split <= n_features
        ):
            raise ValueError(
                f"features_per_split must be in [1, {n_features}], "
                f"got {self.features_per_split}"
            )

    def resolved_features_per_split(self, n_features: int, classification: bool) -> int:
        if self.features_per_split is not None:
            return self.features_per_split
        if classification:
            return max(1, math.ceil(math.sqrt(n_features)))
        return max(1, math.ceil(n_features / 3))


@dataclass
class DecisionTree:
    """Flat-array tree: feature[i] == -1 marks node i as a leaf."""

    feature: np.ndarray    # int32, -1 for leaves
    threshold: np.ndarray  # float64, go left when x[f] <= threshold
    left: np.ndarray       # int32 child ids
    right: np.ndarray
    value: np.ndarray      # float64 leaf prediction (unused on internal nodes)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            live = np.flatnonzero(feat != _LEAF)
            if live.size == 0:
                return self.value[node]
            cur = node[live]
            go_left = X[live, feat[live]] <= self.threshold[cur]
            node[live] = np.where(go_left, self.left[cur], self.right[cur])


class _PackedTrees:
    """All trees of a forest in padded 2-D arrays, so a batch of rows is
    routed through every tree with one numpy op per depth level."""

    def __init__(self, trees: list[DecisionTree]):
        n = max(t.feature.size for t in trees)
        self.depth_bound = 0
        self.feature = np.full((len(trees), n), _LEAF, dtype=np.int32)
        self.threshold = np.zeros((len(trees), n))
        self.left = np.zeros((len(trees), n), dtype=np.int32)
        self.right = np.zeros((len(trees), n), dtype=np.int32)
        self.value = np.zeros((len(trees), n))
        for i, t in enumerate(trees):
            k = t.feature.size
            self.feature[i, :k] = t.feature
            self.threshold[i, :k] = t.threshold
            self.left[i, :k] = t.left
            self.right[i, :k] = t.right
            self.value[i, :k] = t.value
            self.depth_bound = max(self.depth_bound, _tree_depth(t))

    def predict_mean(self, X: np.ndarray) -> np.ndarray:
        n_trees = self.feature.shape[0]
        tree_ix = np.arange(n_trees)[None, :]
        node = np.zeros((X.shape[0], n_trees), dtype=np.int32)
        rows = np.arange(X.shape[0])[:, None]
        for _ in range(self.depth_bound):
            f = self.feature[tree_ix, node]
            internal = f != _LEAF
            if not internal.any():
                break
            go_left = X[rows, np.maximum(f, 0)] <= self.threshold[tree_ix, node]
            node = np.where(
                internal,
                np.where(go_left, self.left[tree_ix, node], self.right[tree_ix, node]),
                node,
            )
        return self.value[tree_ix, node].mean(axis=1)


def _tree_depth(tree: DecisionTree) -> int:
    depth = np.zeros(tree.feature.size, dtype=np.int32)
    out = 0
    for i in range(tree.feature.size):
        if tree.feature[i] != _LEAF:
            depth[tree.left[i]] = depth[i] + 1
            depth[tree.right[i]] = depth[i] + 1
        else:
            out = max(out, int(depth[i]))
    return out


@dataclass
class ForestClassifier:
    trees: list[DecisionTree]
    params: ForestParams
    n_features: int
    _packed: _PackedTrees | None = None


@dataclass
class ForestRegressor:
    trees: list[DecisionTree]
    params: ForestParams
    n_features: int
    _packed: _PackedTrees | None = None


class _TreeBuilder:
    def __init__(self, X, y, params, m_try, classification, rng):
        self.X = X
        self.y = y
        self.params = params
        self.m_try = m_try
        self.classification = classification
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def new_node(self) -> int:
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, idx: np.ndarray) -> DecisionTree:
        root = self.new_node()
        stack = [(idx, 0, root)]
        while stack:
            rows, depth, node = stack.pop()
            y = self.y[rows]
            if (
                depth >= self.params.max_depth
                or rows.size < 2 * self.params.min_samples_leaf
                or y.min() == y.max()
            ):
                self.value[node] = float(y.mean())
                continue
            split = self._best_split(rows)
            if split is None:
                self.value[node] = float(y.mean())
                continue
            f, thr, left_rows, right_rows = split
            self.feature[node] = f
            self.threshold[node] = thr
            left_id = self.new_node()
            right_id = self.new_node()
            self.left[node] = left_id
            self.right[node] = right_id
            stack.append((right_rows, depth + 1, right_id))
            stack.append((left_rows, depth + 1, left_id))
        return DecisionTree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
        )

    def _best_split(self, rows: np.ndarray):
        n = rows.size
        d = self.X.shape[1]
        min_leaf = self.params.min_samples_leaf
        # features constant within the node do not count against the per-split
        # budget; keep scanning the shuffled remainder until enough splittable
        # candidates were examined
        feats = self.rng.permutation(d)
        examined = 0
        best_cost = np.inf
        best = None
        for f in feats:
            if examined >= self.m_try:
                break
            v = self.X[rows, f]
            order = np.argsort(v, kind="stable")
            sv = v[order]
            sy = self.y[rows[order]]
            # candidate cut after position i needs a strict value change
            cuts = np.flatnonzero(sv[:-1] < sv[1:])
            if cuts.size == 0:
                continue
            examined += 1
            n_left = cuts + 1
            n_right = n - n_left
            ok = (n_left >= min_leaf) & (n_right >= min_leaf)
            cuts = cuts[ok]
            if cuts.size == 0:
                continue
            n_left = n_left[ok]
            n_right = n_right[ok]
            csum = np.cumsum(sy)[cuts]
            total = float(sy.sum())
            if self.classification:
                # weighted Gini up to a constant factor: sum of p(1-p)*n per side
                cost = (
                    csum * (n_left - csum) / n_left
                    + (total - csum) * (n_right - (total - csum)) / n_right
                )
            else:
                csum2 = np.cumsum(sy * sy)[cuts]
                total2 = float((sy * sy).sum())
                cost = (
                    (csum2 - csum * csum / n_left)
                    + ((total2 - csum2) - (total - csum) ** 2 / n_right)
                )
            k = int(np.argmin(cost))
            if cost[k] < best_cost:
                i = int(cuts[k])
                thr = float((sv[i] + sv[i + 1]) / 2.0)
                best_cost = float(cost[k])
                best = (int(f), thr)
        if best is None:
            return None
        f, thr = best
        mask = self.X[rows, f] <= thr
        return f, thr, rows[mask], rows[~mask]


def _fit_forest(rows, targets, params: ForestParams, classification: bool):
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training data must be a non-empty 2-D array")
    if y.shape != (X.shape[0],):
        raise ValueError(
            f"labels must have shape ({X.shape[0]},), got {y.shape}"
        )
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise ValueError("training data must be finite")
    if classification and not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("classifier labels must be binary (0/1)")
    params.validate(X.shape[1])
    m_try = params.resolved_features_per_split(X.shape[1], classification)
    n = X.shape[0]
    trees = []
    for i in range(params.n_trees):
        # per-tree seed stream derived from the master seed and a counter, so
        # results do not depend on fitting order
        rng = np.random.default_rng([params.seed, i])
        if params.bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        builder = _TreeBuilder(X, y, params, m_try, classification, rng)
        trees.append(builder.build(idx))
    return trees, X.shape[1]


def fit_classifier(rows, labels, params: ForestParams | None = None) -> ForestClassifier:
    params = params or ForestParams()
    trees, d = _fit_forest(rows, labels, params, classification=True)
    return ForestClassifier(trees=trees, params=params, n_features=d)


def fit_regressor(rows, targets, params: ForestParams | None = None) -> ForestRegressor:
    params = params or ForestParams()
    trees, d = _fit_forest(rows, targets, params, classification=False)
    return ForestRegressor(trees=trees, params=params, n_features=d)


def _check_batch(model, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"expected rows with {model.n_features} features, got shape {X.shape}"
        )
    return X


def _ensemble_predict(model, X) -> np.ndarray:
    X = _check_batch(model, X)
    if model._packed is None:
        model._packed = _PackedTrees(model.trees)
    return model._packed.predict_mean(X)


def predict_proba_batch(model: ForestClassifier, rows) -> np.ndarray:
    return _ensemble_predict(model, rows)


def predict_proba(model: ForestClassifier, row) -> float:
    return float(_ensemble_predict(model, np.asarray(row)[None, :])[0])


def predict_value_batch(model: ForestRegressor, rows) -> np.ndarray:
    return _ensemble_predict(model, rows)


def predict_value(model: ForestRegressor, row) -> float:
    return float(_ensemble_predict(model, np.asarray(row)[None, :])[0])
