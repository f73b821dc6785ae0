"""Multinomial logistic regression with an L2 penalty on the weights."""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

N_CLASSES = 3


def objective(w, X, Y, C):
    """Summed cross-entropy plus 0.5/C * ||W||^2 (intercepts unpenalized), with its gradient."""
    n, d = X.shape
    k = Y.shape[1]
    W = w[: d * k].reshape(d, k)
    b = w[d * k:]
    Z = X @ W + b
    lse = logsumexp(Z, axis=1)
    loss = float(np.sum(lse) - np.sum(Z * Y)) + 0.5 / C * float(np.dot(w[: d * k], w[: d * k]))
    P = np.exp(Z - lse[:, None])
    D = P - Y
    gW = X.T @ D + W / C
    gb = D.sum(axis=0)
    return loss, np.concatenate([gW.ravel(), gb])


class LogisticRegression:
    family = "LR"

    def __init__(self, C=1.0, max_iter=2000):
        self.C = float(C)
        self.max_iter = int(max_iter)
        self.classes: np.ndarray | None = None
        self.W = None
        self.b = None
        self.info: dict = {}

    def fit(self, X, y, seed=0):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.classes = np.unique(y)
        k = self.classes.size
        Y = (y[:, None] == self.classes[None, :]).astype(float)
        d = X.shape[1]
        res = minimize(objective, np.zeros(d * k + k), args=(X, Y, self.C), jac=True, method="L-BFGS-B",
                       options={"maxiter": self.max_iter})
        self.W = res.x[: d * k].reshape(d, k).copy()
        self.b = res.x[d * k:].copy()
        self.info = {"iterations": int(res.nit), "converged": bool(res.success)}
        return self

    def decision(self, X):
        return np.asarray(X, float) @ self.W + self.b

    def predict(self, X):
        return self.classes[np.argmax(self.decision(X), axis=1)]

    def state(self):
        return ({"C": self.C, "max_iter": self.max_iter, "info": self.info},
                {"classes": self.classes, "W": self.W, "b": self.b})

    @classmethod
    def from_state(cls, params, arrays):
        m = cls(params["C"], params["max_iter"])
        m.info = params.get("info", {})
        m.classes = np.asarray(arrays["classes"], dtype=np.int64)
        m.W = np.asarray(arrays["W"], float)
        m.b = np.asarray(arrays["b"], float)
        return m
