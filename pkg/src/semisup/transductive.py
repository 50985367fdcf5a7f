"""Graph propagation methods for transductive semi-supervised classification.

Every method maps (graph, partial labels) to soft and hard labels for all
nodes.  Estimators follow the scikit-learn convention for semi-supervised
input: ``y`` is a length-n integer array with -1 marking unlabeled nodes.
After ``fit`` each estimator exposes ``soft_`` (n x k), ``hard_`` (argmax with
ties broken toward the lowest class index), ``n_iter_``, ``residual_`` and
``converged_``.  Non-convergence is reported through ``converged_``, never as
an exception: comparative studies want the partial answer plus the flag.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg
from sklearn.base import BaseEstimator

from .graph import (
    SparseGraph,
    connected_components,
    degree_vector,
    laplacian,
    normalized_adjacency,
    transition_row_stochastic,
)
from .learners import LogisticRegressionGD


class TransductiveError(Exception):
    pass


@dataclass
class PropagationResult:
    soft: np.ndarray
    hard: np.ndarray
    iterations: int
    residual: float
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def _split_labels(y: np.ndarray) -> tuple[np.ndarray, int]:
    y = np.asarray(y, dtype=np.int64)
    mask = y >= 0
    if not np.any(mask):
        raise TransductiveError("no labeled nodes")
    k = int(y[mask].max()) + 1
    present = np.bincount(y[mask], minlength=k)
    if np.any(present == 0):
        raise TransductiveError(
            f"every class needs a labeled node; missing {np.flatnonzero(present == 0).tolist()}"
        )
    return mask, k


def _one_hot(y: np.ndarray, mask: np.ndarray, k: int) -> np.ndarray:
    Y = np.zeros((len(y), k))
    idx = np.flatnonzero(mask)
    Y[idx, y[idx]] = 1.0
    return Y


def _hard(soft: np.ndarray) -> np.ndarray:
    # np.argmax already breaks ties toward the lowest class index
    return np.argmax(soft, axis=1).astype(np.int64)


def _check_labeled_components(g: SparseGraph, mask: np.ndarray) -> None:
    n_comp, comp = connected_components(g)
    for c in range(n_comp):
        members = comp == c
        if not np.any(mask & members):
            raise TransductiveError(
                f"connected component {c} (size {int(members.sum())}) has no labeled node"
            )


class TransductiveMethod(BaseEstimator):
    """Shared surface: fit(graph, y[, features]) then read soft_/hard_."""

    requires_features = False

    def fit(self, graph: SparseGraph, y, features=None):
        raise NotImplementedError

    def _finish(self, soft, iterations, residual, converged, **diagnostics):
        self.soft_ = soft
        self.hard_ = _hard(soft)
        self.n_iter_ = int(iterations)
        self.residual_ = float(residual)
        self.converged_ = bool(converged)
        self.diagnostics_ = diagnostics
        return self

    def result(self) -> PropagationResult:
        return PropagationResult(
            soft=self.soft_,
            hard=self.hard_,
            iterations=self.n_iter_,
            residual=self.residual_,
            converged=self.converged_,
            diagnostics=self.diagnostics_,
        )


class LabelPropagation(TransductiveMethod):
    """Iterate F <- P F with labeled rows clamped to their one-hot values."""

    def __init__(self, tol=1e-6, max_iter=1000):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, graph, y, features=None):
        mask, k = _split_labels(y)
        Y = _one_hot(y, mask, k)
        P = transition_row_stochastic(graph)
        F = Y.copy()
        residual = np.inf
        iterations = 0
        for iterations in range(1, self.max_iter + 1):
            F_new = P @ F
            F_new[mask] = Y[mask]
            residual = float(np.max(np.abs(F_new - F)))
            F = F_new
            if residual < self.tol:
                break
        return self._finish(F, iterations, residual, residual < self.tol)


class LabelSpreading(TransductiveMethod):
    """Iterate F <- alpha S F + (1 - alpha) Y with S the normalized adjacency.

    Fixed point (1 - alpha)(I - alpha S)^-1 Y; the residual reported is the
    fixed-point defect ||F - alpha S F - (1 - alpha) Y||_max.
    """

    def __init__(self, alpha=0.9, tol=1e-6, max_iter=1000):
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, graph, y, features=None):
        if not (0.0 < self.alpha < 1.0):
            raise TransductiveError("alpha must be in (0, 1)")
        mask, k = _split_labels(y)
        Y = _one_hot(y, mask, k)
        S = normalized_adjacency(graph)
        F = Y.copy()
        residual = np.inf
        iterations = 0
        for iterations in range(1, self.max_iter + 1):
            F_new = self.alpha * (S @ F) + (1.0 - self.alpha) * Y
            residual = float(np.max(np.abs(F_new - F)))
            F = F_new
            if residual < self.tol:
                break
        return self._finish(F, iterations, residual, residual < self.tol)


def _harmonic_solve(
    W: sparse.csr_matrix, Y: np.ndarray, mask: np.ndarray, tol: float, max_iter: int
) -> tuple[np.ndarray, int, float]:
    """Clamp labeled rows and solve (D_uu - W_uu) F_u = W_ul Y_l per class (CG)."""
    deg = np.asarray(W.sum(axis=1)).ravel()
    unlabeled = ~mask
    F = Y.copy()
    if not np.any(unlabeled):
        return F, 0, 0.0
    idx_u = np.flatnonzero(unlabeled)
    idx_l = np.flatnonzero(mask)
    W_uu = W[idx_u][:, idx_u]
    W_ul = W[idx_u][:, idx_l]
    L_uu = sparse.diags(deg[idx_u]) - W_uu
    B = W_ul @ Y[idx_l]
    iterations = 0
    residual = 0.0
    for c in range(Y.shape[1]):
        b = B[:, c]
        if np.allclose(b, 0.0):
            continue
        x, info = splinalg.cg(L_uu, b, rtol=tol, atol=0.0, maxiter=max_iter)
        if info > 0:
            # accept the partial CG answer; caller reports via residual
            pass
        elif info < 0:
            raise TransductiveError("conjugate gradient failed on the unlabeled block")
        F[idx_u, c] = x
        iterations = max(iterations, max_iter if info > 0 else 0)
        residual = max(residual, float(np.linalg.norm(L_uu @ x - b) / np.linalg.norm(b)))
    return F, iterations, residual


class LaplaceLearning(TransductiveMethod):
    """Harmonic solution: labeled rows fixed, unlabeled block solved exactly."""

    def __init__(self, tol=1e-8, max_iter=1000, class_mass_normalization=False):
        self.tol = tol
        self.max_iter = max_iter
        self.class_mass_normalization = class_mass_normalization

    def fit(self, graph, y, features=None):
        mask, k = _split_labels(y)
        _check_labeled_components(graph, mask)
        Y = _one_hot(y, mask, k)
        W = graph.to_csr()
        F, iterations, residual = _harmonic_solve(W, Y, mask, self.tol, self.max_iter)
        if self.class_mass_normalization:
            priors = Y[mask].sum(axis=0) / mask.sum()
            mass = F.sum(axis=0)
            scale = np.where(mass > 0, priors / np.maximum(mass, 1e-300), 1.0)
            F = F * scale[None, :]
            F[mask] = Y[mask]
        return self._finish(F, iterations, residual, residual <= self.tol)


class LazyRandomWalk(TransductiveMethod):
    """Evolve per-class start distributions under the lazy walk operator.

    P_lazy = (1 - gamma) I + gamma D^-1 W; q_c starts uniform over labeled
    nodes of class c and takes `steps` steps; soft labels are the per-node
    normalization of the class distributions.
    """

    def __init__(self, gamma=0.5, steps=50):
        self.gamma = gamma
        self.steps = steps

    def fit(self, graph, y, features=None):
        if not (0.0 < self.gamma <= 1.0):
            raise TransductiveError("gamma must be in (0, 1]")
        mask, k = _split_labels(y)
        P = transition_row_stochastic(graph)
        n = graph.n
        Q = np.zeros((k, n))
        for c in range(k):
            members = np.flatnonzero(mask & (y == c))
            Q[c, members] = 1.0 / len(members)
        residual = 0.0
        for _ in range(self.steps):
            Q_new = (1.0 - self.gamma) * Q + self.gamma * (Q @ P)
            residual = float(np.max(np.abs(Q_new - Q)))
            Q = Q_new
        totals = Q.sum(axis=0)
        soft = np.zeros((n, k))
        reachable = totals > 0
        soft[reachable] = (Q[:, reachable] / totals[reachable]).T
        unreachable = int(np.sum(~reachable))
        return self._finish(
            soft, self.steps, residual, True, unreachable_nodes=unreachable
        )


class DynamicLabelPropagation(TransductiveMethod):
    """Propagation with a transition matrix updated from the evolving labels.

    Dense: the transition update T <- P_K T P_K^T + alpha Y Y^T is O(n^2)
    memory, so n is capped at 4000.
    """

    MAX_DENSE_N = 4000

    def __init__(self, alpha=0.05, knn_k=5, rounds=20):
        self.alpha = alpha
        self.knn_k = knn_k
        self.rounds = rounds

    def fit(self, graph, y, features=None):
        n = graph.n
        if n > self.MAX_DENSE_N:
            raise TransductiveError(
                f"dynamic_label_propagation is dense; n={n} exceeds limit {self.MAX_DENSE_N}"
            )
        mask, k = _split_labels(y)
        Yc = _one_hot(y, mask, k)
        T = np.asarray(transition_row_stochastic(graph).todense())
        P_K = self._sparsified_transition(graph)
        Y = Yc.copy()
        residual = 0.0
        for _ in range(self.rounds):
            Y_new = T @ Y
            Y_new[mask] = Yc[mask]
            residual = float(np.max(np.abs(Y_new - Y)))
            T = P_K @ T @ P_K.T + self.alpha * (Y @ Y.T)
            row_sums = T.sum(axis=1, keepdims=True)
            T = np.divide(T, row_sums, out=np.zeros_like(T), where=row_sums > 0)
            Y = Y_new
        return self._finish(Y, self.rounds, residual, True)

    def _sparsified_transition(self, graph: SparseGraph) -> np.ndarray:
        """Keep each node's knn_k strongest edges, then row-normalize."""
        W = np.asarray(graph.to_csr().todense())
        n = graph.n
        out = np.zeros_like(W)
        kk = min(self.knn_k, n - 1)
        for i in range(n):
            row = W[i]
            # strongest weights; ties toward the lower node index
            order = np.lexsort((np.arange(n), -row))
            keep = [j for j in order if row[j] > 0][:kk]
            out[i, keep] = row[keep]
        row_sums = out.sum(axis=1, keepdims=True)
        if np.any(row_sums == 0):
            raise TransductiveError("knn sparsification isolated a node")
        return out / row_sums


class PoissonLearning(TransductiveMethod):
    """Solve L u = B with centered sources, by preconditioned Richardson steps.

    B has row y_j - y_bar at labeled node j (y_bar = labeled mean one-hot) and
    zeros elsewhere, so its columns sum to zero and the system is solvable on
    a connected graph.  Each iterate is re-centered to degree-weighted zero
    mean per class.
    """

    def __init__(self, tol=1e-8, max_iter=2000, reweight_priors=False):
        self.tol = tol
        self.max_iter = max_iter
        self.reweight_priors = reweight_priors

    def fit(self, graph, y, features=None):
        mask, k = _split_labels(y)
        if int(mask.sum()) < k:
            raise TransductiveError("poisson learning needs at least k labeled nodes")
        n_comp, comp = connected_components(graph)
        if n_comp > 1:
            sizes = np.bincount(comp).tolist()
            raise TransductiveError(
                f"poisson learning requires a connected graph; got {n_comp} components "
                f"of sizes {sizes} (per-component source sums would not vanish)"
            )
        Y = _one_hot(y, mask, k)
        y_bar = Y[mask].mean(axis=0)
        B = np.zeros_like(Y)
        B[mask] = Y[mask] - y_bar[None, :]
        L = laplacian(graph, "unnormalized")
        deg = degree_vector(graph)
        inv_deg = 1.0 / deg
        total_deg = deg.sum()
        b_norm = float(np.linalg.norm(B))
        u = np.zeros_like(B)
        residual = np.inf
        iterations = 0
        for iterations in range(1, self.max_iter + 1):
            r = B - L @ u
            u = u + inv_deg[:, None] * r
            u = u - deg @ u / total_deg  # degree-weighted re-centering
            residual = float(np.linalg.norm(B - L @ u) / b_norm)
            if residual <= self.tol:
                break
        soft = u
        if self.reweight_priors:
            priors = Y[mask].mean(axis=0)
            soft = u * priors[None, :]
        return self._finish(soft, iterations, residual, residual <= self.tol)


def _balanced_threshold(u: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, bool]:
    """Per-class offsets so that argmax(u + s) counts match targets within 1.

    Coordinate-wise bisection sweeps; count_c is monotone in s_c with the
    other offsets fixed.  Returns (hard labels, balanced flag).
    """
    n, k = u.shape

    def counts_for(s):
        assign = np.argmax(u + s[None, :], axis=1)
        return assign, np.bincount(assign, minlength=k)

    s = np.zeros(k)
    assign, counts = counts_for(s)
    if np.all(np.abs(counts - targets) <= 1.0):
        return assign, True
    span = float(np.max(u) - np.min(u)) + 1.0
    for _ in range(8):  # sweeps
        for c in range(k):
            lo, hi = -span, span
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                s_try = s.copy()
                s_try[c] = mid
                _, cnt = counts_for(s_try)
                if cnt[c] < targets[c]:
                    lo = mid
                else:
                    hi = mid
            s[c] = 0.5 * (lo + hi)
        assign, counts = counts_for(s)
        if np.all(np.abs(counts - targets) <= 1.0):
            return assign, True
    return np.argmax(u, axis=1), False


class PoissonMBO(TransductiveMethod):
    """Poisson learning refined by diffusion/threshold (MBO) iterations.

    Each outer round takes `inner` explicit gradient steps on the Poisson
    energy, then thresholds rows to one-hot with per-class offsets chosen by
    bisection so predicted class proportions match the labeled priors within
    one node.  If balancing degenerates, plain argmax is used and flagged.
    """

    def __init__(self, outer=20, inner=40, dt=0.5, mu=1.0):
        self.outer = outer
        self.inner = inner
        self.dt = dt
        self.mu = mu

    def fit(self, graph, y, features=None):
        mask, k = _split_labels(y)
        poisson = PoissonLearning().fit(graph, y)
        u = poisson.soft_.copy()
        Y = _one_hot(y, mask, k)
        y_bar = Y[mask].mean(axis=0)
        B = np.zeros_like(Y)
        B[mask] = Y[mask] - y_bar[None, :]
        L = laplacian(graph, "unnormalized")
        inv_deg = 1.0 / degree_vector(graph)
        priors = Y[mask].sum(axis=0) / mask.sum()
        targets = priors * graph.n
        balanced = True
        hard = np.argmax(u, axis=1)
        if self.outer == 0:
            return self._finish(
                u, poisson.n_iter_, poisson.residual_, poisson.converged_, balanced=True
            )
        for _ in range(self.outer):
            for _ in range(self.inner):
                u = u - self.dt * (inv_deg[:, None] * (L @ u - self.mu * B))
            hard, ok = _balanced_threshold(u, targets)
            balanced = balanced and ok
            u = np.zeros_like(u)
            u[np.arange(graph.n), hard] = 1.0
        return self._finish(u, self.outer, 0.0, True, balanced=balanced)


class PLaplaceLearning(TransductiveMethod):
    """p-Laplacian smoothing by iteratively reweighted Laplace solves.

    Edge weights are rescaled by (|u_i - u_j|^2 + eps)^((p-2)/2) each outer
    round; p = 2 reduces exactly to Laplace learning.
    """

    def __init__(self, p=3.0, outer=50, eps=1e-8, tol=1e-6):
        self.p = p
        self.outer = outer
        self.eps = eps
        self.tol = tol

    def fit(self, graph, y, features=None):
        if self.p < 2.0:
            raise TransductiveError("p must be >= 2")
        mask, k = _split_labels(y)
        _check_labeled_components(graph, mask)
        Y = _one_hot(y, mask, k)
        W = graph.to_csr()
        F, _, inner_res = _harmonic_solve(W, Y, mask, 1e-10, 2000)
        residual = np.inf
        iterations = 0
        exponent = (self.p - 2.0) / 2.0
        rows = np.repeat(np.arange(graph.n), np.diff(graph.row_offsets))
        cols = graph.col_indices
        for iterations in range(1, self.outer + 1):
            diff2 = np.sum((F[rows] - F[cols]) ** 2, axis=1)
            w_tilde = graph.weights * (diff2 + self.eps) ** exponent
            W_t = sparse.csr_matrix((w_tilde, cols, graph.row_offsets), shape=(graph.n, graph.n))
            F_new, _, inner_res = _harmonic_solve(W_t, Y, mask, 1e-10, 2000)
            residual = float(np.max(np.abs(F_new - F)))
            F = F_new
            if residual < self.tol:
                break
        return self._finish(F, iterations, residual, residual < self.tol)


class GraphHop(TransductiveMethod):
    """Iterated classifier smoothing over neighborhood-aggregated soft labels.

    A logistic regression on raw features initializes soft labels; each round
    re-trains it on embeddings concat(F, mean 1-hop F[, mean 2-hop F]) of the
    labeled nodes, predicts everywhere, and re-clamps labeled rows.
    """

    requires_features = True

    def __init__(self, rounds=10, hops=2, logreg_l2=1e-4, logreg_learning_rate=0.1,
                 logreg_epochs=200):
        self.rounds = rounds
        self.hops = hops
        self.logreg_l2 = logreg_l2
        self.logreg_learning_rate = logreg_learning_rate
        self.logreg_epochs = logreg_epochs

    def _learner(self):
        return LogisticRegressionGD(
            l2=self.logreg_l2,
            learning_rate=self.logreg_learning_rate,
            epochs=self.logreg_epochs,
        )

    def fit(self, graph, y, features=None):
        if features is None:
            raise TransductiveError("graphhop requires node features")
        if self.hops not in (1, 2):
            raise TransductiveError("hops must be 1 or 2")
        mask, k = _split_labels(y)
        X = np.asarray(features, dtype=np.float64)
        idx_l = np.flatnonzero(mask)
        Y = _one_hot(y, mask, k)
        clf = self._learner().fit(X[idx_l], y[idx_l], n_classes=k)
        F = clf.predict_proba(X)
        F[mask] = Y[mask]
        P = transition_row_stochastic(graph)
        residual = 0.0
        for _ in range(self.rounds):
            hop1 = P @ F
            parts = [F, hop1]
            if self.hops == 2:
                parts.append(P @ hop1)
            E = np.hstack(parts)
            clf = self._learner().fit(E[idx_l], y[idx_l], n_classes=k)
            F_new = clf.predict_proba(E)
            F_new[mask] = Y[mask]
            residual = float(np.max(np.abs(F_new - F)))
            F = F_new
        return self._finish(F, self.rounds, residual, True)


REGISTRY: dict[str, type[TransductiveMethod]] = {
    "label_propagation": LabelPropagation,
    "label_spreading": LabelSpreading,
    "laplace": LaplaceLearning,
    "lazy_random_walk": LazyRandomWalk,
    "dynamic_label_propagation": DynamicLabelPropagation,
    "poisson": PoissonLearning,
    "poisson_mbo": PoissonMBO,
    "p_laplace": PLaplaceLearning,
    "graphhop": GraphHop,
}


def make_method(name: str, params: dict | None = None) -> TransductiveMethod:
    if name not in REGISTRY:
        raise TransductiveError(f"unknown transductive method {name!r}")
    return REGISTRY[name](**(params or {}))
