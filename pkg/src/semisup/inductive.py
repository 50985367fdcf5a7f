"""Inductive wrapper strategies around pluggable supervised base learners.

Each strategy implements fit(X_l, y_l, X_u) -> self and predict(X), with
predict_proba(X) where the strategy has a natural soft output.  Strategies
never inspect the base learner beyond the fit/predict_proba contract, so any
registered learner works with any strategy.  New strategies plug in by adding
a class with the same surface to REGISTRY.
"""
from __future__ import annotations

from statistics import NormalDist

import numpy as np
from sklearn.base import BaseEstimator

from .learners import make_learner
from .rng import generator


class InductiveError(Exception):
    pass


def _as_arrays(X_l, y_l, X_u):
    X_l = np.asarray(X_l, dtype=np.float64)
    y_l = np.asarray(y_l, dtype=np.int64)
    X_u = (
        np.asarray(X_u, dtype=np.float64)
        if X_u is not None and len(X_u)
        else np.empty((0, X_l.shape[1]))
    )
    return X_l, y_l, X_u


class InductiveStrategy(BaseEstimator):
    def fit(self, X_l, y_l, X_u, n_classes=None):
        raise NotImplementedError

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class SelfTraining(InductiveStrategy):
    """Iteratively absorb unlabeled points whose top probability reaches tau."""

    def __init__(self, base="knn", tau=0.95, max_rounds=10, base_params=None):
        self.base = base
        self.tau = tau
        self.max_rounds = max_rounds
        self.base_params = base_params

    def fit(self, X_l, y_l, X_u, n_classes=None):
        if not (0.5 < self.tau <= 1.01):
            raise InductiveError("tau must be in (0.5, 1.01]")
        X_l, y_l, X_u = _as_arrays(X_l, y_l, X_u)
        k = int(n_classes) if n_classes is not None else int(y_l.max()) + 1
        self.n_classes_ = k
        X_train, y_train = X_l, y_l
        remaining = np.arange(len(X_u))
        model = make_learner(self.base, self.base_params).fit(X_train, y_train, n_classes=k)
        self.rounds_run_ = 0
        for _ in range(self.max_rounds):
            if len(remaining) == 0:
                break
            proba = model.predict_proba(X_u[remaining])
            conf = proba.max(axis=1)
            qualify = conf >= self.tau
            if not np.any(qualify):
                break
            picked = remaining[qualify]
            X_train = np.vstack([X_train, X_u[picked]])
            y_train = np.concatenate([y_train, np.argmax(proba[qualify], axis=1)])
            remaining = remaining[~qualify]
            model = make_learner(self.base, self.base_params).fit(
                X_train, y_train, n_classes=k
            )
            self.rounds_run_ += 1
        self.model_ = model
        self.train_size_ = len(y_train)
        return self

    def predict_proba(self, X):
        return self.model_.predict_proba(np.asarray(X, dtype=np.float64))


class TriTraining(InductiveStrategy):
    """Three bootstrap models teach each other where the other two agree.

    An update for model i is accepted only when the agreement-conditional
    error e_t of the pair (j, k) drops and e_t * |L_t| < e_prev * l_prev,
    subsampling candidates when needed.  Prediction is a majority vote with
    ties toward the lowest class index.
    """

    def __init__(self, base="knn", seed=0, base_params=None):
        self.base = base
        self.seed = seed
        self.base_params = base_params

    def _bootstrap(self, X_l, y_l, k, i):
        m = len(y_l)
        for retry in range(100):
            rng = generator(self.seed, "tri", i, retry)
            idx = rng.integers(0, m, size=m)
            if len(np.unique(y_l[idx])) == k:
                return idx
        raise InductiveError("bootstrap resampling failed to cover every class")

    def fit(self, X_l, y_l, X_u, n_classes=None):
        X_l, y_l, X_u = _as_arrays(X_l, y_l, X_u)
        k = int(n_classes) if n_classes is not None else int(y_l.max()) + 1
        self.n_classes_ = k
        models = []
        for i in range(3):
            idx = self._bootstrap(X_l, y_l, k, i)
            models.append(
                make_learner(self.base, self.base_params).fit(X_l[idx], y_l[idx], n_classes=k)
            )
        e_prev = [0.5, 0.5, 0.5]
        l_prev = [0, 0, 0]
        if len(X_u):
            for round_no in range(20):
                preds_l = [m.predict(X_l) for m in models]
                preds_u = [m.predict(X_u) for m in models]
                updates = []
                for i in range(3):
                    j, h = [x for x in range(3) if x != i]
                    agree = preds_l[j] == preds_l[h]
                    if not np.any(agree):
                        updates.append(None)
                        continue
                    e = float(np.mean(preds_l[j][agree] != y_l[agree]))
                    if e >= e_prev[i]:
                        updates.append(None)
                        continue
                    cand = np.flatnonzero(preds_u[j] == preds_u[h])
                    if l_prev[i] == 0:
                        l_prev[i] = int(e / (e_prev[i] - e)) + 1
                    if len(cand) <= l_prev[i]:
                        updates.append(None)
                        continue
                    if e * len(cand) >= e_prev[i] * l_prev[i]:
                        if e <= 0 or l_prev[i] <= e / (e_prev[i] - e):
                            updates.append(None)
                            continue
                        size = int(np.ceil(e_prev[i] * l_prev[i] / e)) - 1
                        rng = generator(self.seed, "tri_sub", i, round_no)
                        cand = rng.permutation(cand)[:size]
                        if len(cand) <= l_prev[i]:
                            updates.append(None)
                            continue
                    updates.append((e, cand, preds_u[j][cand]))
                if all(u is None for u in updates):
                    break
                for i, update in enumerate(updates):
                    if update is None:
                        continue
                    e, cand, pseudo = update
                    X_train = np.vstack([X_l, X_u[cand]])
                    y_train = np.concatenate([y_l, pseudo])
                    models[i] = make_learner(self.base, self.base_params).fit(
                        X_train, y_train, n_classes=k
                    )
                    e_prev[i] = e
                    l_prev[i] = len(cand)
        self.models_ = models
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((len(X), self.n_classes_))
        for m in self.models_:
            votes[np.arange(len(X)), m.predict(X)] += 1.0
        return votes / 3.0


def _edit_knn(points: np.ndarray, query_idx: np.ndarray, k: int):
    """Neighbor indices, gaussian weights (auto sigma) within a point set."""
    diffs = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diffs * diffs, axis=2))
    np.fill_diagonal(dist, np.inf)
    k = min(k, len(points) - 1)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    kth = np.take_along_axis(dist, order, axis=1)[:, -1]
    sigma = float(np.mean(kth))
    if sigma <= 0:
        sigma = 1.0
    neigh_d = np.take_along_axis(dist, order, axis=1)
    weights = np.exp(-(neigh_d**2) / (2.0 * sigma**2))
    return order[query_idx], weights[query_idx]


class Setred(InductiveStrategy):
    """Self-training with cut-edge data editing.

    The per_round most confident pseudo-labeled candidates are screened with a
    cut statistic J_i = sum of gaussian edge weights to differently-labeled
    neighbors; candidates whose J_i exceeds the (1 - theta) quantile of its
    normal null (labels drawn from current class priors) are rejected.
    """

    def __init__(self, base="knn", theta=0.1, max_rounds=10, edit_k=3, per_round=10,
                 base_params=None):
        self.base = base
        self.theta = theta
        self.max_rounds = max_rounds
        self.edit_k = edit_k
        self.per_round = per_round
        self.base_params = base_params

    def fit(self, X_l, y_l, X_u, n_classes=None):
        if not (0.0 < self.theta < 1.0):
            raise InductiveError("theta must be in (0, 1)")
        X_l, y_l, X_u = _as_arrays(X_l, y_l, X_u)
        k = int(n_classes) if n_classes is not None else int(y_l.max()) + 1
        self.n_classes_ = k
        z = NormalDist().inv_cdf(1.0 - self.theta)
        X_train, y_train = X_l, y_l
        remaining = np.arange(len(X_u))
        model = make_learner(self.base, self.base_params).fit(X_train, y_train, n_classes=k)
        for _ in range(self.max_rounds):
            if len(remaining) == 0:
                break
            proba = model.predict_proba(X_u[remaining])
            conf = proba.max(axis=1)
            order = np.argsort(-conf, kind="stable")[: self.per_round]
            cand = remaining[order]
            cand_labels = np.argmax(proba[order], axis=1)

            union = np.vstack([X_train, X_u[cand]])
            union_labels = np.concatenate([y_train, cand_labels])
            query = np.arange(len(X_train), len(union))
            neigh, weights = _edit_knn(union, query, self.edit_k)
            priors = np.bincount(y_train, minlength=k) / len(y_train)
            accepted = []
            for c_i, (nbrs, w_row) in enumerate(zip(neigh, weights)):
                label = cand_labels[c_i]
                cut = float(np.sum(w_row * (union_labels[nbrs] != label)))
                p_diff = 1.0 - priors[label]
                mean = float(np.sum(w_row)) * p_diff
                var = float(np.sum(w_row**2)) * p_diff * (1.0 - p_diff)
                threshold = mean + z * np.sqrt(max(var, 0.0))
                if cut <= threshold:
                    accepted.append(c_i)
            if not accepted:
                break
            accepted = np.asarray(accepted)
            X_train = np.vstack([X_train, X_u[cand[accepted]]])
            y_train = np.concatenate([y_train, cand_labels[accepted]])
            remaining = np.setdiff1d(remaining, cand[accepted], assume_unique=True)
            # screened-out candidates stay in the pool for later rounds
            model = make_learner(self.base, self.base_params).fit(
                X_train, y_train, n_classes=k
            )
        self.model_ = model
        return self

    def predict_proba(self, X):
        return self.model_.predict_proba(np.asarray(X, dtype=np.float64))


def wilson_lower_bound(p: float, n: int, z: float = 1.96) -> float:
    """Lower 95% Wilson score bound on a proportion; stable at p = 0 or 1."""
    if n == 0:
        return 0.0
    denom = 1.0 + z * z / n
    center = p + z * z / (2.0 * n)
    spread = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    return float(min(max((center - spread) / denom, 0.0), 1.0))


class DemocraticCoLearning(InductiveStrategy):
    """A committee of distinct learners votes; confident majorities teach
    dissenting members.

    Committee weights are Wilson lower confidence bounds of labeled-set
    accuracy; members with bound <= 0.5 are excluded from voting.
    """

    MAX_ROUNDS = 10

    def __init__(self, learner_specs=None, base_params=None):
        self.learner_specs = learner_specs
        self.base_params = base_params

    def _specs(self):
        specs = self.learner_specs or ["knn", "logreg", "stump_boost"]
        if len(specs) < 3:
            raise InductiveError("democratic co-learning needs >= 3 learners")
        if len(set(map(str, specs))) != len(specs):
            raise InductiveError("committee learners must be pairwise distinct")
        return specs

    def fit(self, X_l, y_l, X_u, n_classes=None):
        specs = self._specs()
        X_l, y_l, X_u = _as_arrays(X_l, y_l, X_u)
        k = int(n_classes) if n_classes is not None else int(y_l.max()) + 1
        self.n_classes_ = k
        m = len(specs)
        extra: list[dict[int, int]] = [{} for _ in range(m)]  # unlabeled idx -> label
        models = [None] * m
        weights = np.zeros(m)
        needs_fit = [True] * m

        def refit(i):
            if extra[i]:
                idx = np.fromiter(extra[i].keys(), dtype=np.int64)
                lab = np.fromiter(extra[i].values(), dtype=np.int64)
                X = np.vstack([X_l, X_u[idx]])
                y = np.concatenate([y_l, lab])
            else:
                X, y = X_l, y_l
            models[i] = make_learner(specs[i], self.base_params).fit(X, y, n_classes=k)

        for _ in range(self.MAX_ROUNDS):
            for i in range(m):
                if needs_fit[i]:
                    refit(i)
                    needs_fit[i] = False
            for i in range(m):
                acc = float(np.mean(models[i].predict(X_l) == y_l))
                weights[i] = wilson_lower_bound(acc, len(y_l))
            if len(X_u) == 0:
                break
            preds = np.stack([mdl.predict(X_u) for mdl in models])
            active = weights > 0.5
            changed = False
            vote_w = np.zeros((len(X_u), k))
            for i in range(m):
                if active[i]:
                    vote_w[np.arange(len(X_u)), preds[i]] += weights[i]
            majority = np.argmax(vote_w, axis=1)
            majority_w = vote_w[np.arange(len(X_u)), majority]
            for i in range(m):
                own_w = vote_w[np.arange(len(X_u)), preds[i]]
                teach = (preds[i] != majority) & (majority_w > own_w)
                for u in np.flatnonzero(teach):
                    if extra[i].get(int(u)) != int(majority[u]):
                        extra[i][int(u)] = int(majority[u])
                        changed = True
                        needs_fit[i] = True
            if not changed:
                break
        self.models_ = models
        self.weights_ = weights
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((len(X), self.n_classes_))
        for mdl, w in zip(self.models_, self.weights_):
            if w > 0.5:
                votes[np.arange(len(X)), mdl.predict(X)] += w
        totals = votes.sum(axis=1, keepdims=True)
        uniform = np.full(self.n_classes_, 1.0 / self.n_classes_)
        return np.where(totals > 0, votes / np.maximum(totals, 1e-300), uniform)


class Assemble(InductiveStrategy):
    """Adaptive semi-supervised boosting over labeled + pseudo-labeled data.

    Pseudo-labels start from a 1-NN assignment to the labeled set; each round
    fits a weighted weak model, adds it with alpha = 0.5 ln((1-eps)/eps),
    re-labels the unlabeled points from the ensemble and re-weights every
    point by exp(-ensemble margin).
    """

    def __init__(self, base="stump_boost", rounds=20, beta=0.9, base_params=None):
        self.base = base
        self.rounds = rounds
        self.beta = beta
        self.base_params = base_params

    def fit(self, X_l, y_l, X_u, n_classes=None):
        if not (0.0 < self.beta <= 1.0):
            raise InductiveError("beta must be in (0, 1]")
        X_l, y_l, X_u = _as_arrays(X_l, y_l, X_u)
        k = int(n_classes) if n_classes is not None else int(y_l.max()) + 1
        self.n_classes_ = k
        n_l, n_u = len(y_l), len(X_u)
        X_all = np.vstack([X_l, X_u]) if n_u else X_l

        if n_u:
            # 1-NN pseudo-label initialization, ties toward the lower index
            d2 = (
                np.sum(X_u * X_u, axis=1)[:, None]
                + np.sum(X_l * X_l, axis=1)[None, :]
                - 2.0 * (X_u @ X_l.T)
            )
            pseudo = y_l[np.argmin(d2, axis=1)]
            y_cur = np.concatenate([y_l, pseudo])
            w = np.concatenate(
                [np.full(n_l, self.beta / n_l), np.full(n_u, (1.0 - self.beta) / n_u)]
            )
            w = w / w.sum()
        else:
            y_cur = y_l
            w = np.full(n_l, 1.0 / n_l)

        F = np.zeros((len(X_all), k))
        self.models_ = []
        self.alphas_ = []
        for t in range(self.rounds):
            model = make_learner(self.base, self.base_params).fit(
                X_all, y_cur, sample_weight=w, n_classes=k
            )
            pred = model.predict(X_all)
            eps = float(np.sum(w[pred != y_cur]))
            if eps >= 0.5:
                if t == 0:
                    raise InductiveError(
                        "weak learner cannot beat 0.5 weighted error (unlearnable)"
                    )
                break
            eps = max(eps, 1e-10)
            alpha = 0.5 * np.log((1.0 - eps) / eps)
            self.models_.append(model)
            self.alphas_.append(alpha)
            F[np.arange(len(X_all)), pred] += alpha
            if n_u:
                y_cur = np.concatenate([y_l, np.argmax(F[n_l:], axis=1)])
            scores_true = F[np.arange(len(X_all)), y_cur]
            F_other = F.copy()
            F_other[np.arange(len(X_all)), y_cur] = -np.inf
            margins = scores_true - F_other.max(axis=1)
            w = np.exp(-margins)
            w = w / w.sum()
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        scores = np.zeros((len(X), self.n_classes_))
        for alpha, model in zip(self.alphas_, self.models_):
            scores[np.arange(len(X)), model.predict(X)] += alpha
        totals = scores.sum(axis=1, keepdims=True)
        uniform = np.full(self.n_classes_, 1.0 / self.n_classes_)
        return np.where(totals > 0, scores / np.maximum(totals, 1e-300), uniform)


REGISTRY: dict[str, type[InductiveStrategy]] = {
    "self_training": SelfTraining,
    "tri_training": TriTraining,
    "setred": Setred,
    "democratic": DemocraticCoLearning,
    "assemble": Assemble,
}


def make_strategy(name: str, params: dict | None = None, seed: int = 0) -> InductiveStrategy:
    """Build a strategy from its registry name and flat config params."""
    params = dict(params or {})
    if name not in REGISTRY:
        raise InductiveError(f"unknown inductive strategy {name!r}")
    base_params = {
        key: params[key]
        for key in (
            "knn_k", "knn_metric", "logreg_l2", "logreg_learning_rate",
            "logreg_epochs", "stump_rounds",
        )
        if key in params
    }
    if name == "self_training":
        return SelfTraining(
            base=params.get("base", "knn"),
            tau=float(params.get("tau", 0.95)),
            max_rounds=int(params.get("max_rounds", 10)),
            base_params=base_params,
        )
    if name == "tri_training":
        return TriTraining(
            base=params.get("base", "knn"), seed=seed, base_params=base_params
        )
    if name == "setred":
        return Setred(
            base=params.get("base", "knn"),
            theta=float(params.get("theta", 0.1)),
            max_rounds=int(params.get("max_rounds", 10)),
            edit_k=int(params.get("edit_k", 3)),
            per_round=int(params.get("per_round", 10)),
            base_params=base_params,
        )
    if name == "democratic":
        return DemocraticCoLearning(base_params=base_params)
    return Assemble(
        base=params.get("base", "stump_boost"),
        rounds=int(params.get("rounds", 20)),
        beta=float(params.get("beta", 0.9)),
        base_params=base_params,
    )
