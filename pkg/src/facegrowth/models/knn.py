"""k-nearest-neighbour classifier (Euclidean)."""
from __future__ import annotations

import numpy as np

from . import backend

N_CLASSES = 3


class KNN:
    family = "NN"

    def __init__(self, k=3):
        self.k = int(k)
        self.X = None
        self.y = None
        self.class_totals = None

    def fit(self, X, y, seed=0):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.class_totals = np.bincount(self.y, minlength=N_CLASSES)
        return self

    def neighbors(self, X):
        return backend.kernels.knn_neighbors(self.X, np.ascontiguousarray(X, dtype=np.float64), self.k)

    def predict(self, X):
        nb = self.neighbors(X)
        labels = self.y[nb]
        out = np.empty(nb.shape[0], dtype=np.int64)
        # vote ties: larger training class first, then lower class code
        pref = sorted(range(N_CLASSES), key=lambda c: (-self.class_totals[c], c))
        for i, row in enumerate(labels):
            counts = np.bincount(row, minlength=N_CLASSES)
            top = counts.max()
            out[i] = next(c for c in pref if counts[c] == top)
        return out

    def state(self):
        return {"k": self.k}, {"X": self.X, "y": self.y}

    @classmethod
    def from_state(cls, params, arrays):
        return cls(params["k"]).fit(arrays["X"], arrays["y"])
