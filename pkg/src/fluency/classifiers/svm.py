"""RBF-kernel soft-margin SVM trained by SMO, one-vs-one for multiclass.

The binary solver follows the LIBSVM recipe: pick the maximal violating
index ``i``, pick ``j`` by the second-order gain, update the pair
analytically, and stop once the KKT gap ``m(a) - M(a)`` drops below ``tol``.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConvergenceWarning
from ._common import check_predict_input, check_training_data

TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class BinarySmoResult:
    alpha: np.ndarray
    bias: float
    kkt_gap: float
    n_iter: int


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iter: int = 1_000_000) -> BinarySmoResult:
    """Solve min 1/2 a'Qa - sum(a), 0 <= a <= C, y'a = 0 with Q = yy' * K.

    ``y`` holds +1/-1. Returns the multipliers, the bias ``b`` of
    ``f(x) = sum_i a_i y_i k(x_i, x) + b`` and the final KKT gap.
    """
    n = y.size
    y = y.astype(np.float64)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(K).copy()
    pos = y > 0

    gap = np.inf
    it = 0
    while it < max_iter:
        at_upper = alpha >= C
        at_lower = alpha <= 0
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        score = -y * grad
        if not up.any() or not low.any():
            gap = 0.0
            break
        up_scores = np.where(up, score, -np.inf)
        i = int(np.argmax(up_scores))
        m = up_scores[i]
        M = np.min(np.where(low, score, np.inf))
        gap = m - M
        if gap < tol:
            break

        # second-order choice of j among violating members of I_low
        b = m - score
        cand = low & (b > 0)
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        gain = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(gain))

        Ki, Kj = K[i], K[j]
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2.0 * Ki[j]
            quad = quad if quad > 0 else TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * Ki[j]
            quad = quad if quad > 0 else TAU
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        # Q[i] = y_i * y * K[i]
        grad += y * (y[i] * (ai - old_i) * Ki + y[j] * (aj - old_j) * Kj)
        it += 1
    else:
        warnings.warn(f"SMO hit max_iter={max_iter} with KKT gap {gap:.3g}", ConvergenceWarning)

    return BinarySmoResult(alpha, -_rho(alpha, grad, y, C), float(gap), it)


def _rho(alpha, grad, y, C) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    at_upper = alpha >= C
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = ~ub_mask
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2)


def resolve_votes(votes: np.ndarray, strength: np.ndarray) -> np.ndarray:
    """Column index per row: most votes wins.

    Ties go to the larger summed |decision| of the pairs each class won,
    then to the lowest index.
    """
    votes = np.atleast_2d(votes)
    strength = np.atleast_2d(np.asarray(strength, dtype=np.float64))
    tied = votes == votes.max(axis=1, keepdims=True)
    return np.argmax(np.where(tied, strength, -np.inf), axis=1)


@dataclass
class PairMachine:
    positive: int        # class voted for when the decision value is > 0
    negative: int
    support: np.ndarray  # [n_sv, d]
    coef: np.ndarray     # alpha_i * y_i
    bias: float
    alpha: np.ndarray
    kkt_gap: float = 0.0
    n_iter: int = 0

    def decision(self, X: np.ndarray, gamma: float) -> np.ndarray:
        if self.support.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_kernel(X, self.support, gamma) @ self.coef + self.bias


@dataclass
class SvmModel:
    classes: np.ndarray
    machines: list
    C: float
    gamma: float
    tol: float = 1e-3
    seed: Optional[int] = None
    n_features: int = 0
    kind: str = field(default="svm", init=False)

    def decision_values(self, X) -> np.ndarray:
        """[n, n_pairs] raw decision values, pairs in (0,1), (0,2), (1,2) order."""
        X = check_predict_input(X, self.n_features)
        return np.column_stack([m.decision(X, self.gamma) for m in self.machines])

    def _votes(self, X):
        dec = self.decision_values(X)
        k = self.classes.size
        votes = np.zeros((dec.shape[0], k), dtype=np.int64)
        strength = np.zeros((dec.shape[0], k))
        col = {c: i for i, c in enumerate(self.classes)}
        for p, m in enumerate(self.machines):
            d = dec[:, p]
            win = d > 0
            for c, mask in ((m.positive, win), (m.negative, ~win)):
                votes[mask, col[c]] += 1
                strength[mask, col[c]] += np.abs(d[mask])
        return votes, strength

    def vote_scores(self, X) -> np.ndarray:
        """Per-class vote counts; each row sums to the number of class pairs."""
        return self._votes(X)[0]

    def predict(self, X) -> np.ndarray:
        return self.classes[resolve_votes(*self._votes(X))]


def svm_train(X, y, C: float = 1.0, gamma: Optional[float] = None, seed: Optional[int] = None,
              tol: float = 1e-3, max_iter: int = 1_000_000) -> SvmModel:
    """Train one binary RBF machine per unordered class pair.

    ``gamma`` defaults to ``1 / n_features``. The solver is deterministic;
    ``seed`` is carried on the model only so every trainer shares a signature.
    """
    X, y = check_training_data(X, y)
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    gamma = 1.0 / X.shape[1] if gamma is None else float(gamma)
    classes = np.unique(y)
    machines = []
    for a, b in itertools.combinations(classes, 2):
        rows = np.flatnonzero((y == a) | (y == b))
        Xp = X[rows]
        yp = np.where(y[rows] == a, 1.0, -1.0)
        res = smo_solve(rbf_kernel(Xp, Xp, gamma), yp, C, tol, max_iter)
        sv = res.alpha > 0
        machines.append(PairMachine(int(a), int(b), Xp[sv], res.alpha[sv] * yp[sv], res.bias,
                                    res.alpha, res.kkt_gap, res.n_iter))
    return SvmModel(classes, machines, float(C), gamma, tol, seed, X.shape[1])


def svm_predict(model: SvmModel, X) -> np.ndarray:
    return model.predict(X)


def svm_vote_scores(model: SvmModel, X) -> np.ndarray:
    return model.vote_scores(X)


__all__ = ["SvmModel", "rbf_kernel", "resolve_votes", "smo_solve", "svm_predict",
           "svm_train", "svm_vote_scores"]
