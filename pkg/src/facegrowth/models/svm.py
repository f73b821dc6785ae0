"""RBF-kernel C-SVM, one-vs-one, dual solved by SMO in the kernel backend."""
from __future__ import annotations

from itertools import combinations

import numpy as np
from scipy.spatial.distance import cdist

from . import backend

N_CLASSES = 3


def rbf(A, B, gamma):
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


def intercept(alpha, grad, y, C) -> float:
    """Bias from the KKT conditions (average over free vectors, else bound midpoint)."""
    yG = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(np.sum(yG[free]) / np.count_nonzero(free))
    at_upper = alpha >= C
    ub, lb = np.inf, -np.inf
    for i in range(y.size):
        if at_upper[i] == (y[i] < 0):
            ub = min(ub, yG[i])
        else:
            lb = max(lb, yG[i])
    return (ub + lb) / 2


class SVM:
    family = "SVM"

    def __init__(self, C=1.0, tol=1e-3, max_iter=None):
        self.C = float(C)
        self.tol = float(tol)
        self.max_iter = max_iter
        self.gamma = None
        self.X = None
        self.pairs: list[tuple[int, int]] = []
        self.coef: list[np.ndarray] = []      # alpha_i * y_i over all training rows
        self.rho: list[float] = []
        self.info: dict = {}

    def fit(self, X, y, seed=0):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        var = float(X.var())
        self.gamma = 1.0 / (d * var) if var > 0 else 1.0 / d
        self.X = X
        K = rbf(X, X, self.gamma)
        classes = np.unique(y)
        self.pairs, self.coef, self.rho = [], [], []
        iters, converged = [], True
        for a, b in combinations(classes.tolist(), 2):
            rows = np.flatnonzero((y == a) | (y == b))
            ys = np.where(y[rows] == a, 1.0, -1.0)
            Q = np.ascontiguousarray(ys[:, None] * ys[None, :] * K[np.ix_(rows, rows)])
            cap = int(self.max_iter) if self.max_iter is not None else max(100_000, 100 * rows.size)
            alpha, grad, it, ok = backend.kernels.smo_solve(Q, ys, self.C, self.tol, cap)
            coef = np.zeros(n)
            coef[rows] = alpha * ys
            self.pairs.append((a, b))
            self.coef.append(coef)
            self.rho.append(intercept(alpha, grad, ys, self.C))
            iters.append(int(it))
            converged = converged and bool(ok)
        self.info = {"iterations": iters, "converged": converged, "gamma": self.gamma}
        return self

    def predict(self, X):
        Kx = rbf(np.ascontiguousarray(X, dtype=np.float64), self.X, self.gamma)
        votes = np.zeros((Kx.shape[0], N_CLASSES), dtype=np.int64)
        for (a, b), coef, rho in zip(self.pairs, self.coef, self.rho):
            dec = Kx @ coef - rho
            votes[dec > 0, a] += 1
            votes[dec <= 0, b] += 1
        return np.argmax(votes, axis=1)

    def state(self):
        return ({"C": self.C, "tol": self.tol, "max_iter": self.max_iter, "gamma": self.gamma,
                 "pairs": [list(p) for p in self.pairs], "rho": self.rho, "info": self.info},
                {"X": self.X, "coef": np.array(self.coef).reshape(len(self.coef), -1)})

    @classmethod
    def from_state(cls, params, arrays):
        m = cls(params["C"], params["tol"], params["max_iter"])
        m.gamma = params["gamma"]
        m.pairs = [tuple(p) for p in params["pairs"]]
        m.rho = list(params["rho"])
        m.info = params.get("info", {})
        m.X = np.ascontiguousarray(arrays["X"], dtype=np.float64)
        m.coef = list(np.asarray(arrays["coef"], float))
        return m
