"""The 16-model zoo behind a single train/predict contract."""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Sequence

import numpy as np

from . import backend
from .knn import KNN
from .linear import LogisticRegression
from .mlp import MLP, gradient_check
from .preprocessing import Standardizer
from .svm import SVM
from .trees import DecisionTree, GradientBoosting, RandomForest

CANONICAL_MODELS = (
    "MLP", "MLP(20)", "MLP(50)", "MLP(100)", "MLP(50,10)", "MLP(50,20)", "MLP(50,50)",
    "XGB(100)", "XGB(300)", "RF(100)", "RF(300)", "SVM", "LR", "DT", "NN(3)", "NN(5)",
)
FAMILIES = ("MLP", "XGB", "RF", "SVM", "LR", "DT", "NN")
STANDARDIZED_FAMILIES = frozenset({"MLP", "LR", "SVM", "NN"})

_NAME = re.compile(r"^([A-Z]+)(?:\(([\d,\s]*)\))?$")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    family: str
    args: tuple[int, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown model family {self.family!r}")
        n = len(self.args)
        if self.family in ("XGB", "RF", "NN") and n != 1:
            raise ModelError(f"{self.family} takes exactly one argument")
        if self.family in ("SVM", "LR", "DT") and n:
            raise ModelError(f"{self.family} takes no arguments")
        if any(a < 1 for a in self.args):
            raise ModelError(f"model arguments must be positive: {self.args}")

    @property
    def name(self) -> str:
        if not self.args:
            return self.family
        return f"{self.family}({','.join(str(a) for a in self.args)})"

    def __str__(self):
        return self.name

    @classmethod
    def parse(cls, name: str) -> "ModelSpec":
        m = _NAME.match(name.strip())
        if not m:
            raise ModelError(f"cannot parse model name {name!r}")
        args = tuple(int(a) for a in m.group(2).split(",")) if m.group(2) else ()
        return cls(m.group(1), args)


def canonical_specs() -> list[ModelSpec]:
    return [ModelSpec.parse(n) for n in CANONICAL_MODELS]


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    validation_fraction: float = 0.2
    patience: int = 50
    max_epochs: int = 10000
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-7
    lr_C: float = 1.0
    lr_max_iter: int = 2000
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    xgb_max_depth: int = 6
    xgb_learning_rate: float = 0.3
    xgb_reg_lambda: float = 1.0
    xgb_min_child_weight: float = 1.0
    xgb_gamma: float = 0.0
    xgb_min_split_gain: float = 1e-6
    standardize: bool = True

    def __post_init__(self):
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ModelError("validation_fraction must lie in [0, 1)")
        if self.patience < 1 or self.max_epochs < 1:
            raise ModelError("patience and max_epochs must be positive")

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ModelError(f"unknown training config keys: {unknown}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def build(spec: ModelSpec, cfg: TrainConfig):
    f, a = spec.family, spec.args
    if f == "MLP":
        return MLP(a, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon,
                   cfg.max_epochs, cfg.patience, cfg.validation_fraction)
    if f == "XGB":
        return GradientBoosting(a[0], cfg.xgb_max_depth, cfg.xgb_learning_rate, cfg.xgb_reg_lambda,
                                cfg.xgb_min_child_weight, cfg.xgb_gamma, cfg.xgb_min_split_gain)
    if f == "RF":
        return RandomForest(a[0])
    if f == "SVM":
        return SVM(cfg.svm_C, cfg.svm_tol)
    if f == "LR":
        return LogisticRegression(cfg.lr_C, cfg.lr_max_iter)
    if f == "DT":
        return DecisionTree()
    return KNN(a[0])


ESTIMATORS = {"MLP": MLP, "XGB": GradientBoosting, "RF": RandomForest, "SVM": SVM,
              "LR": LogisticRegression, "DT": DecisionTree, "NN": KNN}


@dataclass
class TrainedModel:
    spec: ModelSpec
    estimator: object
    scaler: Standardizer
    width: int
    seed: int
    metadata: dict = field(default_factory=dict)

    def predict(self, rows) -> np.ndarray:
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.width:
            raise ModelError(f"expected rows of width {self.width}, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ModelError("non-finite feature values")
        return np.asarray(self.estimator.predict(self.scaler.transform(X)), dtype=np.int64)

    def predict_proba(self, rows) -> np.ndarray:
        if not hasattr(self.estimator, "predict_proba"):
            raise ModelError(f"{self.spec.name} has no probability output")
        return self.estimator.predict_proba(self.scaler.transform(np.asarray(rows, dtype=np.float64)))


def fit(spec: ModelSpec, X, y, config: TrainConfig | None = None) -> TrainedModel:
    """Train ``spec`` on a feature matrix and class codes."""
    config = config or TrainConfig()
    if isinstance(spec, str):
        spec = ModelSpec.parse(spec)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ModelError(f"bad training shapes X{X.shape} y{y.shape}")
    if not np.all(np.isfinite(X)):
        raise ModelError("non-finite feature values")
    if np.unique(y).size < 2:
        raise ModelError("training data holds a single class")
    if y.min() < 0 or y.max() > 2:
        raise ModelError("class codes must be 0, 1 or 2")
    if config.standardize and spec.family in STANDARDIZED_FAMILIES:
        scaler = Standardizer.fit(X)
    else:
        scaler = Standardizer.identity(X.shape[1])
    est = build(spec, config)
    est.fit(scaler.transform(X), y, seed=config.seed)
    meta = {"backend": backend.BACKEND, **getattr(est, "info", {})}
    return TrainedModel(spec, est, scaler, X.shape[1], int(config.seed), meta)


def train(spec: ModelSpec, table, config: TrainConfig | None = None) -> TrainedModel:
    """Train on a FeatureTable."""
    return fit(spec, table.X, table.y, config)


def predict(model: TrainedModel, rows) -> np.ndarray:
    return model.predict(rows)


def mlp_gradient_check(spec: ModelSpec | str, X, y, seed=0) -> float:
    """Max relative error of the MLP backprop gradient against central differences."""
    if isinstance(spec, str):
        spec = ModelSpec.parse(spec)
    if spec.family != "MLP":
        raise ModelError("gradient check applies to MLP specs only")
    return gradient_check(spec.args, X, y, seed=seed)


def pinned_hyperparameters(config: TrainConfig | None = None) -> dict:
    """Every fixed hyperparameter, per family, for run metadata."""
    cfg = config or TrainConfig()
    return {
        "MLP": {"hidden_activation": "relu", "output": "softmax", "init": "glorot_uniform",
                "optimizer": "adam", "learning_rate": cfg.learning_rate, "beta1": cfg.adam_beta1,
                "beta2": cfg.adam_beta2, "epsilon": cfg.adam_epsilon, "batch": "full",
                "max_epochs": cfg.max_epochs, "patience": cfg.patience,
                "validation_fraction": cfg.validation_fraction, "restore_best": True},
        "LR": {"penalty": "l2", "C": cfg.lr_C, "max_iter": cfg.lr_max_iter, "solver": "L-BFGS-B",
               "multi_class": "multinomial"},
        "SVM": {"kernel": "rbf", "C": cfg.svm_C, "gamma": "1/(d*var(X))", "tol": cfg.svm_tol,
                "decision": "one-vs-one", "max_iter": "max(100000, 100*n)"},
        "XGB": {"max_depth": cfg.xgb_max_depth, "learning_rate": cfg.xgb_learning_rate,
                "reg_lambda": cfg.xgb_reg_lambda, "min_child_weight": cfg.xgb_min_child_weight,
                "gamma": cfg.xgb_gamma, "min_split_gain": cfg.xgb_min_split_gain,
                "objective": "softmax", "base_margin": 0.0, "hessian": "p*(1-p)"},
        "RF": {"criterion": "gini", "max_features": "max(1, int(sqrt(d)))", "bootstrap": True,
               "max_depth": None, "vote": "hard"},
        "DT": {"criterion": "gini", "max_depth": None, "max_features": "all"},
        "NN": {"metric": "euclidean", "distance_ties": "lower row index",
               "vote_ties": "larger training class, then class order"},
        "standardize": sorted(STANDARDIZED_FAMILIES) if cfg.standardize else [],
    }


__all__ = [
    "CANONICAL_MODELS", "ModelSpec", "ModelError", "TrainConfig", "TrainedModel", "canonical_specs",
    "fit", "train", "predict", "mlp_gradient_check", "pinned_hyperparameters", "ESTIMATORS",
]
