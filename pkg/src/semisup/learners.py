"""Built-in supervised base learners.

All three are deliberately simple and fully deterministic (zero-initialized
weights, exact neighbor search, exhaustive stump enumeration): the wrapper
strategies are the interesting layer, and deterministic bases make strategy
behavior exactly reproducible.  Every learner implements
fit(X, y, sample_weight=None, n_classes=None) and predict_proba(X) with rows
summing to 1.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator


class LearnerError(Exception):
    pass


def _resolve_n_classes(y: np.ndarray, n_classes: int | None) -> int:
    return int(n_classes) if n_classes is not None else int(np.max(y)) + 1


def _one_hot(y: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(y), k))
    out[np.arange(len(y)), y] = 1.0
    return out


class KNNClassifier(BaseEstimator):
    """Exact k nearest neighbors; probability = (weighted) vote fraction.

    Distance ties break toward the lower training index.  If the training set
    is smaller than k, all training points vote.
    """

    def __init__(self, k=5, metric="euclidean"):
        self.k = k
        self.metric = metric

    def fit(self, X, y, sample_weight=None, n_classes=None):
        self.X_ = np.asarray(X, dtype=np.float64)
        self.y_ = np.asarray(y, dtype=np.int64)
        self.n_classes_ = _resolve_n_classes(self.y_, n_classes)
        if sample_weight is None:
            self.sample_weight_ = np.ones(len(self.y_))
        else:
            self.sample_weight_ = np.asarray(sample_weight, dtype=np.float64)
        return self

    def _distances(self, X):
        if self.metric == "euclidean":
            sq_train = np.sum(self.X_ * self.X_, axis=1)
            sq_query = np.sum(X * X, axis=1)
            d2 = sq_query[:, None] + sq_train[None, :] - 2.0 * (X @ self.X_.T)
            return np.sqrt(np.maximum(d2, 0.0))
        if self.metric == "cosine":
            norms_t = np.linalg.norm(self.X_, axis=1)
            norms_q = np.linalg.norm(X, axis=1)
            if np.any(norms_t == 0) or np.any(norms_q == 0):
                raise LearnerError("zero-norm vector under cosine metric")
            sim = (X / norms_q[:, None]) @ (self.X_ / norms_t[:, None]).T
            return 1.0 - np.clip(sim, -1.0, 1.0)
        raise LearnerError(f"unknown metric {self.metric!r}")

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        dist = self._distances(X)
        k = min(self.k, len(self.y_))
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        votes = np.zeros((len(X), self.n_classes_))
        neigh_w = self.sample_weight_[order]
        neigh_y = self.y_[order]
        for c in range(self.n_classes_):
            votes[:, c] = np.sum(neigh_w * (neigh_y == c), axis=1)
        totals = votes.sum(axis=1, keepdims=True)
        # all-zero vote mass can only happen with zero sample weights; fall
        # back to a uniform row
        uniform = np.full(self.n_classes_, 1.0 / self.n_classes_)
        out = np.where(totals > 0, votes / np.maximum(totals, 1e-300), uniform)
        return out

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class LogisticRegressionGD(BaseEstimator):
    """Multinomial logistic regression by full-batch gradient descent.

    Softmax cross-entropy with L2 penalty on the weights (bias unpenalized),
    zero-initialized, fixed learning rate and epoch count: no randomness.
    """

    def __init__(self, l2=1e-4, learning_rate=0.1, epochs=200):
        self.l2 = l2
        self.learning_rate = learning_rate
        self.epochs = epochs

    def fit(self, X, y, sample_weight=None, n_classes=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        k = _resolve_n_classes(y, n_classes)
        n, d = X.shape
        if sample_weight is None:
            sw = np.full(n, 1.0 / n)
        else:
            sw = np.asarray(sample_weight, dtype=np.float64)
            sw = sw / sw.sum()
        Y = _one_hot(y, k)
        W = np.zeros((d, k))
        b = np.zeros(k)
        for _ in range(self.epochs):
            P = _softmax(X @ W + b)
            G = (P - Y) * sw[:, None]
            W -= self.learning_rate * (X.T @ G + self.l2 * W)
            b -= self.learning_rate * G.sum(axis=0)
        self.coef_ = W
        self.intercept_ = b
        self.n_classes_ = k
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        return _softmax(X @ self.coef_ + self.intercept_)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class _Stump:
    __slots__ = ("feature", "threshold", "left_class", "right_class")

    def __init__(self, feature, threshold, left_class, right_class):
        self.feature = feature
        self.threshold = threshold
        self.left_class = left_class
        self.right_class = right_class

    def predict(self, X):
        left = X[:, self.feature] <= self.threshold
        return np.where(left, self.left_class, self.right_class)


def _best_stump(X, y, sw, k):
    """Weighted-error-minimizing axis-aligned stump.

    Ties break toward the lower feature index, then the lower threshold.
    Falls back to a majority-vote stump when no feature admits a split.
    """
    n, d = X.shape
    class_w = np.array([np.sum(sw[y == c]) for c in range(k)])
    majority = int(np.argmax(class_w))
    best = (np.sum(sw) - class_w[majority], _Stump(0, -np.inf, majority, majority))
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        ws = sw[order]
        # prefix class-weight sums: cum[i, c] = weight of class c among first i
        onehot_w = np.zeros((n, k))
        onehot_w[np.arange(n), ys] = ws
        cum = np.cumsum(onehot_w, axis=0)
        total = cum[-1]
        splits = np.flatnonzero(xs[1:] > xs[:-1])  # split after position i
        for i in splits:
            left_w = cum[i]
            right_w = total - left_w
            lc = int(np.argmax(left_w))
            rc = int(np.argmax(right_w))
            err = (left_w.sum() - left_w[lc]) + (right_w.sum() - right_w[rc])
            if err < best[0] - 1e-15:
                thr = 0.5 * (xs[i] + xs[i + 1])
                best = (err, _Stump(f, thr, lc, rc))
    return best


class StumpBoostClassifier(BaseEstimator):
    """AdaBoost-SAMME over axis-aligned decision stumps."""

    def __init__(self, rounds=50):
        self.rounds = rounds

    def fit(self, X, y, sample_weight=None, n_classes=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        k = _resolve_n_classes(y, n_classes)
        n = len(y)
        if sample_weight is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(sample_weight, dtype=np.float64)
            w = w / w.sum()
        self.n_classes_ = k
        self.stumps_ = []
        self.alphas_ = []
        for _ in range(self.rounds):
            err, stump = _best_stump(X, y, w, k)
            pred = stump.predict(X)
            miss = pred != y
            eps = max(float(np.sum(w[miss])), 1e-10)
            if eps >= 1.0 - 1.0 / k and self.stumps_:
                break
            alpha = np.log((1.0 - eps) / eps) + np.log(k - 1.0) if k > 2 else np.log(
                (1.0 - eps) / eps
            )
            if alpha <= 0:
                # first stump no better than chance; keep it with tiny weight
                alpha = 1e-10
            self.stumps_.append(stump)
            self.alphas_.append(alpha)
            if eps <= 1e-10:
                break
            w = w * np.exp(alpha * miss)
            w = w / w.sum()
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        scores = np.zeros((len(X), self.n_classes_))
        for alpha, stump in zip(self.alphas_, self.stumps_):
            pred = stump.predict(X)
            scores[np.arange(len(X)), pred] += alpha
        totals = scores.sum(axis=1, keepdims=True)
        return scores / np.maximum(totals, 1e-300)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


def make_learner(name: str, params: dict | None = None):
    """Instantiate a base learner from its registry name and flat params.

    Accepts the prefixed parameter names used in method configs
    (knn_k, logreg_l2, stump_rounds, ...); irrelevant keys are ignored.
    """
    params = params or {}
    if name == "knn":
        return KNNClassifier(
            k=int(params.get("knn_k", 5)), metric=params.get("knn_metric", "euclidean")
        )
    if name == "logreg":
        return LogisticRegressionGD(
            l2=float(params.get("logreg_l2", 1e-4)),
            learning_rate=float(params.get("logreg_learning_rate", 0.1)),
            epochs=int(params.get("logreg_epochs", 200)),
        )
    if name == "stump_boost":
        return StumpBoostClassifier(rounds=int(params.get("stump_rounds", 50)))
    raise LearnerError(f"unknown base learner {name!r}")
