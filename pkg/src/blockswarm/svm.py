"""Soft-margin kernel SVM trained by sequential minimal optimization.

The solver follows the second-order working-set selection used by LIBSVM:
pick the most violating index ``i`` from the "up" set, then the partner ``j``
that maximises the guaranteed decrease of the dual objective, and solve the
two-variable subproblem analytically. Features are z-scored inside
:func:`fit` and :func:`predict`.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

TAU = 1e-12


class SvmInputError(ValueError):
    pass


class DegenerateModelError(ValueError):
    """Training labels contain a single class."""


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    kernel: str = "rbf"
    gamma: float | str = "scale"
    kkt_tolerance: float = 1e-3
    max_passes: int = 1000
    standardize: bool = True

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.kernel not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.gamma != "scale" and not (isinstance(self.gamma, (int, float)) and self.gamma > 0):
            raise ValueError("gamma must be positive or 'scale'")


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray  # standardized coordinates
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    feature_means: np.ndarray
    feature_stddevs: np.ndarray
    kernel: str
    gamma: float
    C: float
    training_size: int
    dual_objective: float
    iterations: int

    @property
    def n_features(self) -> int:
        return self.feature_means.shape[0]

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "feature_means": self.feature_means.tolist(),
            "feature_stddevs": self.feature_stddevs.tolist(),
            "kernel": self.kernel,
            "gamma": self.gamma,
            "C": self.C,
            "training_size": self.training_size,
            "dual_objective": self.dual_objective,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        d = dict(d)
        for k in ("support_vectors", "dual_coef", "feature_means", "feature_stddevs"):
            d[k] = np.asarray(d[k], dtype=float)
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    K = A @ B.T
    if kernel == "linear":
        return K
    # in place: exp(-gamma * max(|a|^2 + |b|^2 - 2 a.b, 0))
    K *= -2.0
    K += (A * A).sum(1)[:, None]
    K += (B * B).sum(1)[None, :]
    np.maximum(K, 0.0, out=K)
    K *= -gamma
    return np.exp(K, out=K)


@numba.njit(cache=True)
def _smo(K, y, C, eps, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    while it < max_iter:
        # i: maximal violator in I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v >= gmax:
                    gmax = v
                    i = t
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                ytg = y[t] * G[t]
                if ytg >= gmax2:
                    gmax2 = ytg
                if i < 0:
                    continue
                b = gmax + ytg
                if b > 0:
                    a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if a <= 0:
                        a = TAU
                    v = -(b * b) / a
                    if v <= obj_min:
                        j = t
                        obj_min = v
        if i < 0 or j < 0 or gmax + gmax2 < eps:
            break
        it += 1

        Qii = K[i, i]
        Qjj = K[j, j]
        Qij = y[i] * y[j] * K[i, j]
        old_ai = alpha[i]
        old_aj = alpha[j]
        if y[i] != y[j]:
            quad = Qii + Qjj + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Qii + Qjj - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        for t in range(n):
            G[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)

    # offset rho: decision(x) = sum(alpha*y*K) - rho
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            sfree += yg
    if nfree > 0:
        rho = sfree / nfree
    else:
        rho = (ub + lb) / 2.0
    obj = 0.0
    for t in range(n):
        obj += alpha[t] * (G[t] - 1.0)
    return alpha, rho, 0.5 * obj, it


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise SvmInputError("X must be 2-D with one label per row")
    if X.shape[0] < 2:
        raise SvmInputError("need at least two examples")
    if not np.all(np.isfinite(X)):
        raise SvmInputError("features contain NaN or infinity")
    if not np.all((y == 0) | (y == 1)):
        raise SvmInputError("labels must be 0 or 1")
    return X, y.astype(int)


def standardization(X: np.ndarray, enabled: bool = True) -> tuple[np.ndarray, np.ndarray]:
    if not enabled:
        return np.zeros(X.shape[1]), np.ones(X.shape[1])
    mean = X.mean(0)
    std = X.std(0)
    std[std < 1e-12] = 1.0
    return mean, std


def resolve_gamma(Xs: np.ndarray, cfg: SvmConfig) -> float:
    if cfg.gamma != "scale":
        return float(cfg.gamma)
    var = Xs.var()
    return 1.0 / (Xs.shape[1] * var) if var > 0 else 1.0


def fit(X, y, cfg: SvmConfig | None = None) -> SvmModel:
    cfg = cfg or SvmConfig()
    X, y = _check_xy(X, y)
    if len(np.unique(y)) < 2:
        raise DegenerateModelError("training labels contain a single class")
    mean, std = standardization(X, cfg.standardize)
    Xs = (X - mean) / std
    gamma = resolve_gamma(Xs, cfg)
    K = kernel_matrix(Xs, Xs, cfg.kernel, gamma)
    ys = np.where(y == 1, 1.0, -1.0)
    max_iter = cfg.max_passes * max(len(y), 100)
    alpha, rho, obj, iters = _smo(K, ys, float(cfg.C), float(cfg.kkt_tolerance), max_iter)
    sv = alpha > 0
    return SvmModel(
        support_vectors=Xs[sv].copy(),
        dual_coef=(alpha * ys)[sv],
        bias=-float(rho),
        feature_means=mean,
        feature_stddevs=std,
        kernel=cfg.kernel,
        gamma=gamma,
        C=float(cfg.C),
        training_size=len(y),
        dual_objective=float(obj),
        iterations=int(iters),
    )


def decision_function(model: SvmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise SvmInputError(f"expected {model.n_features} features, got {X.shape[1]}")
    Xs = (X - model.feature_means) / model.feature_stddevs
    if len(model.dual_coef) == 0:
        return np.full(X.shape[0], model.bias)
    K = kernel_matrix(Xs, model.support_vectors, model.kernel, model.gamma)
    return K @ model.dual_coef + model.bias


def predict(model: SvmModel, x) -> int | np.ndarray:
    """Label in {0, 1} for one feature vector, or an array for a matrix."""
    x = np.asarray(x, dtype=float)
    labels = (decision_function(model, x) > 0).astype(int)
    return int(labels[0]) if x.ndim == 1 else labels


def dual_objective(alpha: np.ndarray, X, y, cfg: SvmConfig) -> float:
    """0.5 a'Qa - sum(a) for the problem ``fit`` would solve on (X, y)."""
    X, y = _check_xy(X, y)
    mean, std = standardization(X, cfg.standardize)
    Xs = (X - mean) / std
    K = kernel_matrix(Xs, Xs, cfg.kernel, resolve_gamma(Xs, cfg))
    ys = np.where(y == 1, 1.0, -1.0)
    Q = K * np.outer(ys, ys)
    return float(0.5 * alpha @ Q @ alpha - alpha.sum())


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold index per example; classes are dealt round-robin after shuffling."""
    rng = np.random.default_rng(seed)
    assign = np.empty(len(y), dtype=int)
    offset = 0
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        rng.shuffle(idx)
        assign[idx] = (np.arange(len(idx)) + offset) % folds
        offset = (offset + len(idx)) % folds
    return assign


def group_folds(groups: Sequence, folds: int, seed: int) -> np.ndarray:
    """Fold index per example with every group confined to a single fold."""
    rng = np.random.default_rng(seed)
    keys = sorted(set(groups))
    order = rng.permutation(len(keys))
    fold_of = {keys[k]: pos % folds for pos, k in enumerate(order)}
    return np.array([fold_of[g] for g in groups], dtype=int)


def cross_validate(
    X,
    y,
    cfg: SvmConfig | None = None,
    folds: int = 10,
    seed: int = 0,
    groups: Sequence | None = None,
) -> list[float]:
    """Held-out accuracy of each fold.

    A training split holding a single class predicts its majority label.
    """
    cfg = cfg or SvmConfig()
    X, y = _check_xy(X, y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > len(y):
        warnings.warn(f"reducing folds from {folds} to {len(y)}", stacklevel=2)
        folds = len(y)
    if groups is None:
        assign = stratified_folds(y, folds, seed)
    else:
        assign = group_folds(list(groups), folds, seed)
    scores = []
    for k in range(folds):
        test = assign == k
        if not test.any():
            continue
        train = ~test
        y_tr = y[train]
        if len(np.unique(y_tr)) < 2:
            pred = np.full(test.sum(), int(np.bincount(y_tr, minlength=2).argmax()))
        else:
            model = fit(X[train], y_tr, cfg)
            pred = predict(model, X[test])
        scores.append(float(np.mean(pred == y[test])))
    return scores
