"""Per-model preprocessing: training-row standardization and the early-stopping split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        # constant columns pass through centred
        scale = np.where(std > 0, std, 1.0)
        return cls(mean, scale)

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray((np.asarray(X, float) - self.mean) / self.scale)


def stratified_validation_split(y: np.ndarray, fraction: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Split row indices into (train, validation), drawing ``fraction`` of every class.

    Per class round(fraction * n_c) rows go to validation, but at least one row
    of each class stays in training. Both index arrays are sorted.
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    val = []
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        k = int(np.floor(fraction * members.size + 0.5))
        k = min(k, members.size - 1)
        if k > 0:
            val.append(rng.permutation(members)[:k])
    val_idx = np.sort(np.concatenate(val)) if val else np.zeros(0, dtype=np.int64)
    mask = np.ones(y.size, bool)
    mask[val_idx] = False
    return np.flatnonzero(mask), val_idx
