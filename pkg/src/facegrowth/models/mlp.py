"""Fully connected softmax network trained full-batch with Adam and early stopping."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .preprocessing import stratified_validation_split

N_CLASSES = 3


def layer_shapes(d: int, hidden: Sequence[int], n_out: int = N_CLASSES) -> list[tuple[int, int]]:
    sizes = [d, *hidden, n_out]
    return list(zip(sizes[:-1], sizes[1:]))


def n_parameters(d: int, hidden: Sequence[int]) -> int:
    return sum(a * b + b for a, b in layer_shapes(d, hidden))


def unpack(theta: np.ndarray, shapes) -> list[tuple[np.ndarray, np.ndarray]]:
    """Weight/bias views into the flat parameter vector."""
    out, o = [], 0
    for a, b in shapes:
        W = theta[o:o + a * b].reshape(a, b)
        o += a * b
        out.append((W, theta[o:o + b]))
        o += b
    return out


def glorot_init(shapes, rng: np.random.Generator) -> np.ndarray:
    parts = []
    for a, b in shapes:
        lim = math.sqrt(6.0 / (a + b))
        parts.append(rng.uniform(-lim, lim, size=a * b))
        parts.append(np.zeros(b))
    return np.concatenate(parts)


def forward(theta, shapes, X):
    """Class probabilities and the per-layer activations needed for backprop."""
    layers = unpack(theta, shapes)
    acts = [X]
    A = X
    for W, b in layers[:-1]:
        A = A @ W
        A += b
        np.maximum(A, 0.0, out=A)
        acts.append(A)
    W, b = layers[-1]
    Z = A @ W
    Z += b
    Z -= Z.max(axis=1, keepdims=True)
    np.exp(Z, out=Z)
    Z /= Z.sum(axis=1, keepdims=True)
    return Z, acts


def cross_entropy(P, Y) -> float:
    """Mean categorical cross-entropy; Y is one-hot."""
    p = np.sum(P * Y, axis=1)
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def loss_and_grad(theta, shapes, X, Y) -> tuple[float, np.ndarray]:
    P, acts = forward(theta, shapes, X)
    loss = cross_entropy(P, Y)
    grad = np.empty_like(theta)
    gviews = unpack(grad, shapes)
    layers = unpack(theta, shapes)
    dZ = (P - Y) / X.shape[0]
    for li in range(len(layers) - 1, -1, -1):
        A = acts[li]
        gW, gb = gviews[li]
        np.dot(A.T, dZ, out=gW)
        gb[:] = dZ.sum(axis=0)
        if li:
            dA = dZ @ layers[li][0].T
            dA *= A > 0
            dZ = dA
    return loss, grad


class MLP:
    family = "MLP"

    def __init__(self, hidden: Sequence[int] = (), learning_rate=1e-3, beta1=0.9, beta2=0.999,
                 epsilon=1e-7, max_epochs=10000, patience=50, validation_fraction=0.2):
        self.hidden = tuple(int(h) for h in hidden)
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.max_epochs = int(max_epochs)
        self.patience = int(patience)
        self.validation_fraction = float(validation_fraction)
        self.theta: np.ndarray | None = None
        self.shapes = None
        self.info: dict = {}
        self.val_history: list[float] = []

    def params(self):
        return {"hidden": list(self.hidden), "learning_rate": self.learning_rate, "beta1": self.beta1,
                "beta2": self.beta2, "epsilon": self.epsilon, "max_epochs": self.max_epochs,
                "patience": self.patience, "validation_fraction": self.validation_fraction}

    def fit(self, X, y, seed=0):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        split_seed, init_seed = np.random.SeedSequence(seed).spawn(2)
        tr, va = stratified_validation_split(y, self.validation_fraction, split_seed)
        Xt, Xv = X[tr], X[va]
        Yt = np.eye(N_CLASSES)[y[tr]]
        Yv = np.eye(N_CLASSES)[y[va]]
        if va.size == 0:
            # nothing to hold out: monitor the training loss instead
            Xv, Yv = Xt, Yt
        self.shapes = layer_shapes(X.shape[1], self.hidden)
        theta = glorot_init(self.shapes, np.random.default_rng(init_seed))
        m = np.zeros_like(theta)
        v = np.zeros_like(theta)
        b1, b2, lr, eps = self.beta1, self.beta2, self.learning_rate, self.epsilon
        best, best_theta, best_epoch, wait = math.inf, theta.copy(), 0, 0
        history = []
        epoch = 0
        stopped = False
        while epoch < self.max_epochs:
            epoch += 1
            _, g = loss_and_grad(theta, self.shapes, Xt, Yt)
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            lr_t = lr * math.sqrt(1.0 - b2 ** epoch) / (1.0 - b1 ** epoch)
            theta -= lr_t * m / (np.sqrt(v) + eps)
            val = cross_entropy(forward(theta, self.shapes, Xv)[0], Yv)
            history.append(val)
            if val < best:
                best, best_epoch, wait = val, epoch, 0
                best_theta[:] = theta
            else:
                wait += 1
                if wait >= self.patience:
                    stopped = True
                    break
        self.theta = best_theta
        self.val_history = history
        self.info = {"epochs_run": epoch, "stopped_early": stopped, "best_epoch": best_epoch,
                     "best_val_loss": best, "n_validation": int(va.size)}
        return self

    def predict_proba(self, X):
        return forward(self.theta, self.shapes, np.ascontiguousarray(X, dtype=np.float64))[0]

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def state(self):
        return {**self.params(), "shapes": [list(s) for s in self.shapes], "info": self.info}, {"theta": self.theta}

    @classmethod
    def from_state(cls, params, arrays):
        p = dict(params)
        shapes = p.pop("shapes")
        info = p.pop("info", {})
        m = cls(**p)
        m.shapes = [tuple(s) for s in shapes]
        m.theta = np.array(arrays["theta"], dtype=np.float64)
        m.info = info
        return m


def gradient_check(hidden: Sequence[int], X, y, seed=0, step=1e-5, max_params=50,
                   theta: np.ndarray | None = None) -> float:
    """Max relative error between backprop and central-difference gradients.

    Checks at most ``max_params`` randomly chosen parameters of a Glorot
    initialised network (or of ``theta`` if given).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.eye(N_CLASSES)[np.asarray(y, dtype=np.int64)]
    shapes = layer_shapes(X.shape[1], hidden)
    rng = np.random.default_rng(seed)
    if theta is None:
        theta = glorot_init(shapes, rng)
        # non-zero biases so that every path is exercised
        for _, b in unpack(theta, shapes):
            b[:] = rng.normal(0, 0.1, b.size)
    theta = np.array(theta, dtype=np.float64)
    _, grad = loss_and_grad(theta, shapes, X, Y)
    idx = np.arange(theta.size)
    if idx.size > max_params:
        idx = np.sort(rng.choice(idx, max_params, replace=False))
    worst = 0.0
    for i in idx:
        old = theta[i]
        theta[i] = old + step
        lp, _ = loss_and_grad(theta, shapes, X, Y)
        theta[i] = old - step
        lm, _ = loss_and_grad(theta, shapes, X, Y)
        theta[i] = old
        num = (lp - lm) / (2 * step)
        a = grad[i]
        worst = max(worst, abs(a - num) / max(abs(a) + abs(num), 1e-8))
    return worst
