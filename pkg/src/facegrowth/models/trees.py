"""CART decision tree, random forest and softmax gradient boosting.

Tree construction runs in the kernel backend (compiled or numpy fallback);
this module handles sampling, boosting and voting.
"""
from __future__ import annotations

import math

import numpy as np

from . import backend

N_CLASSES = 3


def presort(X: np.ndarray) -> np.ndarray:
    """Row order of every column, (value, row index) ascending: shape (d, n)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


class Tree:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.ascontiguousarray(feature, dtype=np.int64)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.int64)
        self.right = np.ascontiguousarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def leaves(self, X: np.ndarray) -> np.ndarray:
        return backend.kernels.apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def state(self, prefix: str) -> dict:
        return {f"{prefix}{k}": getattr(self, k) for k in self.__slots__}

    @classmethod
    def from_state(cls, arrays, prefix: str) -> "Tree":
        return cls(*(arrays[f"{prefix}{k}"] for k in cls.__slots__))


def _class_tree(X, y, w, max_features, seed, order) -> Tree:
    f, t, l, r, v = backend.kernels.build_class_tree(
        X, y, w, N_CLASSES, int(max_features), np.uint64(seed), order)
    return Tree(f, t, l, r, v)


class DecisionTree:
    """Unpruned CART (Gini), every feature tried at every split."""

    family = "DT"

    def __init__(self):
        self.tree: Tree | None = None

    def fit(self, X, y, seed=0):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        self.tree = _class_tree(X, y, np.ones(len(y)), X.shape[1], 0, presort(X))
        return self

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return np.argmax(self.tree.value[self.tree.leaves(X)], axis=1)

    def state(self):
        return {}, self.tree.state("t0.")

    @classmethod
    def from_state(cls, params, arrays):
        m = cls()
        m.tree = Tree.from_state(arrays, "t0.")
        return m


class RandomForest:
    """Bootstrap CART ensemble with sqrt(d) candidate features per split and hard voting."""

    family = "RF"

    def __init__(self, n_trees: int = 100):
        self.n_trees = int(n_trees)
        self.trees: list[Tree] = []

    def fit(self, X, y, seed=0):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        n, d = X.shape
        order = presort(X)
        mf = max(1, int(math.sqrt(d)))
        rng = np.random.default_rng(seed)
        self.trees = []
        for _ in range(self.n_trees):
            draw = rng.integers(0, n, n)
            tree_seed = int(rng.integers(0, 2**63, dtype=np.int64))
            w = np.bincount(draw, minlength=n).astype(np.float64)
            self.trees.append(_class_tree(X, y, w, mf, tree_seed, order))
        return self

    def tree_predictions(self, X) -> np.ndarray:
        """(n_trees, n_rows) class predicted by every member tree."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        return np.stack([np.argmax(t.value[t.leaves(X)], axis=1) for t in self.trees])

    def predict(self, X):
        votes = self.tree_predictions(X)
        counts = np.stack([(votes == k).sum(axis=0) for k in range(N_CLASSES)], axis=1)
        return np.argmax(counts, axis=1)   # ties go to the lower class code

    def state(self):
        arrays = {}
        for i, t in enumerate(self.trees):
            arrays.update(t.state(f"t{i}."))
        return {"n_trees": self.n_trees}, arrays

    @classmethod
    def from_state(cls, params, arrays):
        m = cls(params["n_trees"])
        m.trees = [Tree.from_state(arrays, f"t{i}.") for i in range(m.n_trees)]
        return m


class GradientBoosting:
    """Softmax gradient boosting, one depth-limited regression tree per class and round."""

    family = "XGB"

    def __init__(self, n_rounds=100, max_depth=6, learning_rate=0.3, reg_lambda=1.0,
                 min_child_weight=1.0, gamma=0.0, min_split_gain=1e-6):
        self.n_rounds = int(n_rounds)
        self.max_depth = int(max_depth)
        self.learning_rate = float(learning_rate)
        self.reg_lambda = float(reg_lambda)
        self.min_child_weight = float(min_child_weight)
        self.gamma = float(gamma)
        self.min_split_gain = float(min_split_gain)
        self.trees: list[Tree] = []

    def params(self):
        return {k: getattr(self, k) for k in ("n_rounds", "max_depth", "learning_rate", "reg_lambda",
                                              "min_child_weight", "gamma", "min_split_gain")}

    def fit(self, X, y, seed=0):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = X.shape[0]
        order = presort(X)
        Y = np.zeros((n, N_CLASSES))
        Y[np.arange(n), y] = 1.0
        F = np.zeros((n, N_CLASSES))
        self.trees = []
        for _ in range(self.n_rounds):
            P = _softmax(F)
            for k in range(N_CLASSES):
                p = P[:, k]
                g = np.ascontiguousarray(p - Y[:, k])
                h = np.ascontiguousarray(np.maximum(p * (1.0 - p), 1e-16))
                feat, thr, left, right, G, H, row_leaf = backend.kernels.build_boost_tree(
                    X, order, g, h, self.max_depth, self.reg_lambda, self.min_child_weight,
                    self.gamma, self.min_split_gain)
                weight = -G / (H + self.reg_lambda) * self.learning_rate
                self.trees.append(Tree(feat, thr, left, right, weight))
                F[:, k] += weight[row_leaf]
        return self

    def margins(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        F = np.zeros((X.shape[0], N_CLASSES))
        for i, t in enumerate(self.trees):
            F[:, i % N_CLASSES] += t.value[t.leaves(X)]
        return F

    def predict(self, X):
        return np.argmax(self.margins(X), axis=1)

    def state(self):
        arrays = {}
        for i, t in enumerate(self.trees):
            arrays.update(t.state(f"t{i}."))
        return {**self.params(), "n_trees": len(self.trees)}, arrays

    @classmethod
    def from_state(cls, params, arrays):
        p = dict(params)
        n_trees = p.pop("n_trees")
        m = cls(**p)
        m.trees = [Tree.from_state(arrays, f"t{i}.") for i in range(n_trees)]
        return m


def _softmax(F):
    Z = F - F.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)
