"""Random forest of fully grown Gini trees.

Each tree sees a bootstrap sample and, at every node, ``ceil(sqrt(d))``
randomly chosen features. Thresholds are midpoints between adjacent
distinct sorted values, and samples with ``x <= threshold`` go left.
Tree ``t`` draws from ``default_rng([seed, t])`` so trees can be grown in
any order or in parallel with identical results.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._common import argmax_lowest, check_predict_input, check_training_data

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray    # [n_nodes] int, LEAF for leaves
    threshold: np.ndarray  # [n_nodes]
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray     # [n_nodes, n_classes] training class counts

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            active = f != LEAF
            if not active.any():
                return node
            r, n, fa = rows[active], node[active], f[active]
            go_left = X[r, fa] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Class column (0..n_classes-1) of the leaf majority, ties to the lowest."""
        return argmax_lowest(self.counts[self.apply(X)])


def gini(counts: np.ndarray) -> np.ndarray:
    total = counts.sum(axis=-1, keepdims=True)
    p = counts / np.maximum(total, 1)
    return 1.0 - (p * p).sum(axis=-1)


def best_split_on_feature(x: np.ndarray, onehot: np.ndarray):
    """Exhaustive Gini split search on one feature.

    Returns ``(weighted_child_gini, threshold)`` or ``None`` when the
    feature is constant on these rows. Ties keep the lowest threshold.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cum = np.cumsum(onehot[order], axis=0)
    n = xs.size
    lo, hi = xs[:-1], xs[1:]
    mids = lo + (hi - lo) / 2.0
    valid = (lo < mids) & (mids < hi)
    if not valid.any():
        return None
    left = cum[:-1]
    right = cum[-1] - left
    n_left = np.arange(1, n)
    score = (n_left * gini(left) + (n - n_left) * gini(right)) / n
    score = np.where(valid, score, np.inf)
    k = int(np.argmin(score))
    return float(score[k]), float(mids[k])


def grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, max_features: int,
              rng: np.random.Generator, rows: Optional[np.ndarray] = None) -> Tree:
    """Grow one tree until every leaf is pure or holds fewer than 2 samples.

    ``rows`` (with repeats) selects the training multiset; defaults to all rows.
    """
    rows = np.arange(y.size) if rows is None else rows
    d = X.shape[1]
    onehot_all = np.eye(n_classes)[y]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    stack = [(new_node(rows), rows)]
    while stack:
        node, idx = stack.pop()
        c = counts[node]
        if idx.size < 2 or np.count_nonzero(c) <= 1:
            continue
        onehot = onehot_all[idx]
        order = rng.permutation(d)
        best = None
        # past the first max_features, keep looking only until some split is valid
        for rank, f in enumerate(order):
            if rank >= max_features and best is not None:
                break
            found = best_split_on_feature(X[idx, f], onehot)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], found[1], int(f))
        if best is None:
            continue
        _, thr, f = best
        goes_left = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        li, ri = idx[goes_left], idx[~goes_left]
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))

    return Tree(np.array(feature, dtype=np.int64), np.array(threshold),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=np.int64).reshape(-1, n_classes))


def _grow_one(args) -> Tree:
    X, y, n_classes, max_features, seed, t, bootstrap = args
    rng = np.random.default_rng([seed, t])
    rows = rng.integers(0, y.size, y.size) if bootstrap else None
    return grow_tree(X, y, n_classes, max_features, rng, rows)


@dataclass
class ForestModel:
    classes: np.ndarray
    trees: list
    seed: int
    n_features: int
    max_features: int
    bootstrap: bool = True
    kind: str = field(default="rf", init=False)

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    def tree_votes(self, X) -> np.ndarray:
        """[n, n_classes] number of trees voting for each class."""
        X = check_predict_input(X, self.n_features)
        votes = np.zeros((X.shape[0], self.classes.size), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            votes[rows, tree.predict(X)] += 1
        return votes

    def predict_proba(self, X) -> np.ndarray:
        return self.tree_votes(X) / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return self.classes[argmax_lowest(self.tree_votes(X))]


def rf_train(X, y, n_estimators: int = 100, seed: int = 0, max_features="sqrt",
             bootstrap: bool = True, jobs: int = 1) -> ForestModel:
    X, y = check_training_data(X, y)
    if n_estimators < 1:
        raise ValueError(f"n_estimators must be >= 1, got {n_estimators}")
    classes, y_idx = np.unique(y, return_inverse=True)
    d = X.shape[1]
    m = math.ceil(math.sqrt(d)) if max_features == "sqrt" else int(max_features)
    m = min(max(m, 1), d)
    tasks = [(X, y_idx, classes.size, m, seed, t, bootstrap) for t in range(n_estimators)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(_grow_one, tasks))
    else:
        trees = [_grow_one(t) for t in tasks]
    return ForestModel(classes, trees, seed, d, m, bootstrap)


def rf_predict(model: ForestModel, X) -> np.ndarray:
    return model.predict(X)


def rf_predict_proba(model: ForestModel, X) -> np.ndarray:
    return model.predict_proba(X)
