from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PredictError, TrainError

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.means.size:
            raise PredictError(f"expected {self.means.size} features, got shape {X.shape}")
        return (X - self.means) / self.stds


def standardize_fit(X) -> Standardizer:
    """Column means and population stds; stds are floored at ``STD_FLOOR``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise TrainError("cannot fit a standardizer on an empty matrix")
    if not np.all(np.isfinite(X)):
        raise TrainError("feature matrix contains non-finite values")
    return Standardizer(X.mean(axis=0), np.maximum(X.std(axis=0), STD_FLOOR))


def standardize_apply(s: Standardizer, X) -> np.ndarray:
    return s.apply(X)
