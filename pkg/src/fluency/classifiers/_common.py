from __future__ import annotations

import numpy as np

from ..errors import PredictError, TrainError


def check_training_data(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise TrainError(f"X must be a non-empty [n, d] matrix, got shape {X.shape}")
    if y.ndim != 1 or y.size != X.shape[0]:
        raise TrainError(f"y must hold one label per row ({X.shape[0]}), got shape {y.shape}")
    if not np.all(np.isfinite(X)):
        raise TrainError("X contains non-finite values")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise TrainError("labels must be integer class indices")
        y = y.astype(np.int64)
    if np.unique(y).size < 2:
        raise TrainError("need at least two classes to train")
    return X, y.astype(np.int64)


def check_predict_input(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise PredictError(f"model expects {n_features} features, got input of shape {X.shape}")
    return X


def argmax_lowest(scores: np.ndarray) -> np.ndarray:
    """Row-wise argmax; numpy already resolves ties to the lowest index."""
    return np.argmax(scores, axis=1)
