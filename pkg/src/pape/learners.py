"""Weighted learners: ridge-logistic classifier, isotonic map and a line fit.

All three accept per-observation weights with the convention that a row with
weight ``r`` behaves exactly like ``r`` unit-weight copies of that row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTargetError, EmptyInputError, SingularFitError, ValidationError

PROBA_FLOOR = 1e-6


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValidationError("expected a 2-D feature matrix")
    if not np.isfinite(X).all():
        raise ValidationError("feature matrix contains non-finite values")
    return X


def _as_weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != n:
        raise ValidationError(f"got {w.shape[0]} weights for {n} rows")
    if not np.isfinite(w).all() or (w < 0).any():
        raise ValidationError("weights must be finite and nonnegative")
    if w.sum() <= 0:
        raise ValidationError("weights must have a positive sum")
    return w


def _binary(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != n:
        raise ValidationError(f"got {y.shape[0]} targets for {n} rows")
    if not ((y == 0) | (y == 1)).all():
        raise ValidationError("targets must be 0 or 1")
    return y


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


# ---------------------------------------------------------------------------
# probabilistic classifier


@dataclass(frozen=True)
class ProbClassifier:
    """Fitted ridge-penalized logistic model on standardized features."""

    mean: np.ndarray
    scale: np.ndarray
    coef: np.ndarray
    intercept: float
    ridge: float
    max_iter: int
    tol: float
    n_iter: int
    converged: bool

    @property
    def n_features(self) -> int:
        return self.coef.shape[0]

    def decision_function(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValidationError(f"model was fitted on {self.n_features} features, got {X.shape[1]}")
        return ((X - self.mean) / self.scale) @ self.coef + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        """P(y=1 | x), clipped to ``[PROBA_FLOOR, 1 - PROBA_FLOOR]``."""
        return np.clip(sigmoid(self.decision_function(X)), PROBA_FLOOR, 1.0 - PROBA_FLOOR)


def weighted_log_loss(params: np.ndarray, Z: np.ndarray, y: np.ndarray, w: np.ndarray, ridge: float) -> float:
    """Objective minimized by :func:`fit_prob_classifier`.

    ``params`` is ``[coef..., intercept]`` and ``Z`` the standardized design.
    The data term is the weighted mean log-loss; the intercept is not penalized.
    """
    z = Z @ params[:-1] + params[-1]
    data = np.sum(w * (np.logaddexp(0.0, z) - y * z)) / w.sum()
    return float(data + 0.5 * ridge * np.dot(params[:-1], params[:-1]))


def _gradient(params, Z, y, w, ridge):
    p = sigmoid(Z @ params[:-1] + params[-1])
    r = w * (p - y) / w.sum()
    g = np.empty_like(params)
    g[:-1] = Z.T @ r + ridge * params[:-1]
    g[-1] = r.sum()
    return g, p


def fit_prob_classifier(
    X,
    y01,
    weights=None,
    *,
    ridge: float = 1e-4,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> ProbClassifier:
    """Fit a weighted ridge-logistic classifier by damped Newton iterations.

    Features are standardized with weighted moments of the training data.
    Iteration stops once the gradient max-norm drops below ``tol``.
    """
    X = _as_matrix(X)
    n, d = X.shape
    y = _binary(y01, n)
    w = _as_weights(weights, n)
    if np.all(y[w > 0] == y[w > 0][0]):
        raise DegenerateTargetError("targets contain a single class")

    wsum = w.sum()
    mean = (w @ X) / wsum
    scale = np.sqrt((w @ (X - mean) ** 2) / wsum)
    scale[scale <= 1e-12 * np.maximum(1.0, np.abs(mean))] = 1.0
    Z = (X - mean) / scale

    params = np.zeros(d + 1)
    prior = (w @ y) / wsum
    params[-1] = np.log(prior) - np.log1p(-prior)
    loss = weighted_log_loss(params, Z, y, w, ridge)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g, p = _gradient(params, Z, y, w, ridge)
        if np.max(np.abs(g)) < tol:
            converged = True
            it -= 1
            break
        h = w * p * (1.0 - p) / wsum
        A = np.empty((d + 1, d + 1))
        A[:d, :d] = (Z.T * h) @ Z + ridge * np.eye(d)
        A[:d, d] = A[d, :d] = Z.T @ h
        A[d, d] = h.sum()
        A[np.diag_indices(d + 1)] += 1e-12
        try:
            step = np.linalg.solve(A, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(A, g, rcond=None)[0]
        t = 1.0
        while True:
            candidate = params - t * step
            new_loss = weighted_log_loss(candidate, Z, y, w, ridge)
            if new_loss <= loss + 1e-4 * t * np.dot(g, -step) or t < 1e-10:
                break
            t *= 0.5
        params, loss = candidate, new_loss
    else:
        g, _ = _gradient(params, Z, y, w, ridge)
        converged = bool(np.max(np.abs(g)) < tol)

    return ProbClassifier(
        mean=mean,
        scale=scale,
        coef=params[:-1].copy(),
        intercept=float(params[-1]),
        ridge=ridge,
        max_iter=max_iter,
        tol=tol,
        n_iter=it,
        converged=converged,
    )


def predict_proba(model: ProbClassifier, X) -> np.ndarray:
    return model.predict_proba(X)


# ---------------------------------------------------------------------------
# isotonic map


@dataclass(frozen=True)
class MonotoneMap:
    """Non-decreasing piecewise-linear map over [0, 1].

    Inputs outside the breakpoint range take the nearest boundary value.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __call__(self, s) -> np.ndarray:
        return np.interp(np.asarray(s, dtype=float), self.breakpoints, self.values)


def _pool_adjacent_violators(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted isotonic (non-decreasing) least-squares fit of an ordered sequence."""
    n = y.shape[0]
    level = np.empty(n)
    weight = np.empty(n)
    length = np.empty(n, dtype=np.intp)
    top = -1
    for i in range(n):
        top += 1
        level[top], weight[top], length[top] = y[i], w[i], 1
        while top > 0 and level[top - 1] >= level[top]:
            wt = weight[top - 1] + weight[top]
            level[top - 1] = (weight[top - 1] * level[top - 1] + weight[top] * level[top]) / wt
            weight[top - 1] = wt
            length[top - 1] += length[top]
            top -= 1
    return np.repeat(level[: top + 1], length[: top + 1])


def fit_monotone_map(s, y01, weights=None) -> MonotoneMap:
    """Weighted isotonic regression of binary targets on scores."""
    s = np.asarray(s, dtype=float).ravel()
    n = s.shape[0]
    if n == 0:
        raise EmptyInputError("cannot fit a monotone map on empty input")
    y = _binary(y01, n)
    w = _as_weights(weights, n)
    if not (np.isfinite(s).all() and (s >= 0).all() and (s <= 1).all()):
        raise ValidationError("scores must lie in [0, 1]")
    keep = w > 0
    s, y, w = s[keep], y[keep], w[keep]

    xs, inverse = np.unique(s, return_inverse=True)
    wk = np.bincount(inverse, weights=w, minlength=xs.shape[0])
    yk = np.bincount(inverse, weights=w * y, minlength=xs.shape[0]) / wk
    fitted = np.clip(_pool_adjacent_violators(yk, wk), 0.0, 1.0)
    return MonotoneMap(xs, fitted)


# ---------------------------------------------------------------------------
# straight line


@dataclass(frozen=True)
class LinearModel:
    slope: float
    intercept: float

    def predict(self, u) -> np.ndarray:
        return self.slope * np.asarray(u, dtype=float) + self.intercept


def fit_line(u, v) -> LinearModel:
    """Ordinary least squares fit ``v ~ slope * u + intercept``."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise ValidationError("u and v must have equal length")
    if u.shape[0] < 2:
        raise SingularFitError("need at least two points for a line fit")
    du = u - u.mean()
    sxx = du @ du
    if sxx <= 0.0:
        raise SingularFitError("u is constant")
    slope = (du @ (v - v.mean())) / sxx
    return LinearModel(float(slope), float(v.mean() - slope * u.mean()))
