from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError
from .forest import rf_train
from .mlp import mlp_train
from .standardize import Standardizer, standardize_fit
from .svm import svm_train

MODEL_KINDS = ("svm", "rf", "mlp")

# standardisation is on for the margin/gradient models, off for the trees
STANDARDIZE_DEFAULT = {"svm": True, "rf": False, "mlp": True}


@dataclass
class FittedPipeline:
    """A classifier plus the standardizer fitted on its training rows."""

    model: object
    standardizer: Optional[Standardizer] = None
    meta: dict = field(default_factory=dict)
    train_seconds: float = field(default=0.0, compare=False)

    @property
    def kind(self) -> str:
        return self.model.kind

    @property
    def n_features(self) -> int:
        return self.model.n_features

    def _prep(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X if self.standardizer is None else self.standardizer.apply(X)

    def predict(self, X) -> np.ndarray:
        return self.model.predict(self._prep(X))

    def predict_proba(self, X) -> np.ndarray:
        return self.model.predict_proba(self._prep(X))


@dataclass(frozen=True)
class ModelSpec:
    """Hyperparameters for one of the three model kinds."""

    kind: str
    C: float = 1.0
    gamma: Optional[float] = None
    trees: int = 100
    epochs: int = 200
    batch: int = 32
    lr: float = 1e-3
    hidden: tuple = (512, 512)
    standardize: Optional[bool] = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.kind!r}; choose from {', '.join(MODEL_KINDS)}")

    @property
    def uses_standardizer(self) -> bool:
        return STANDARDIZE_DEFAULT[self.kind] if self.standardize is None else self.standardize

    def hyperparameters(self) -> dict:
        if self.kind == "svm":
            return {"C": self.C, "gamma": self.gamma}
        if self.kind == "rf":
            return {"trees": self.trees}
        return {"epochs": self.epochs, "batch": self.batch, "lr": self.lr, "hidden": list(self.hidden)}


def train_model(spec: ModelSpec, X, y, seed: int = 42, jobs: int = 1) -> FittedPipeline:
    """Fit the standardizer (if any) on ``X`` only, then the classifier.

    ``meta`` records hyperparameters, seed, wall-clock seconds and any
    training warnings.
    """
    X = np.asarray(X, dtype=np.float64)
    std = standardize_fit(X) if spec.uses_standardizer else None
    Xt = X if std is None else std.apply(X)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if spec.kind == "svm":
            model = svm_train(Xt, y, C=spec.C, gamma=spec.gamma, seed=seed)
        elif spec.kind == "rf":
            model = rf_train(Xt, y, n_estimators=spec.trees, seed=seed, jobs=jobs)
        else:
            model = mlp_train(Xt, y, epochs=spec.epochs, batch=spec.batch, lr=spec.lr,
                              seed=seed, hidden=spec.hidden)
    elapsed = time.perf_counter() - t0
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    meta = {"hyperparameters": spec.hyperparameters(), "seed": seed,
            "warnings": [str(w.message) for w in caught]}
    return FittedPipeline(model, std, meta, elapsed)
