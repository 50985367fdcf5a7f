import numpy as np
import pytest
from scipy import sparse

from semisup import transductive as tmod
from semisup.graph import (
    degree_vector,
    laplacian,
    normalized_adjacency,
    transition_row_stochastic,
)
from semisup.learners import LogisticRegressionGD

from conftest import graph_from_edges, path_graph, random_connected_graph, random_labels

P3_Y = np.array([0, -1, 1])


# ---------------------------------------------------------------------------
# analytical path-graph fixtures


def test_label_propagation_p3():
    m = tmod.LabelPropagation(tol=1e-10, max_iter=5000).fit(path_graph(3), P3_Y)
    assert np.allclose(m.soft_[1], [0.5, 0.5], atol=1e-8)
    assert m.hard_[1] == 0  # tie toward the lower class index
    assert m.converged_


def test_laplace_p3_harmonic_half():
    m = tmod.LaplaceLearning().fit(path_graph(3), P3_Y)
    assert np.allclose(m.soft_[1], [0.5, 0.5], atol=1e-8)
    assert np.allclose(m.soft_[0], [1.0, 0.0])
    assert np.allclose(m.soft_[2], [0.0, 1.0])


def test_laplace_p4_interior():
    y = np.array([0, -1, -1, 1])
    m = tmod.LaplaceLearning().fit(path_graph(4), y)
    assert np.allclose(m.soft_[1], [2 / 3, 1 / 3], atol=1e-8)
    assert np.allclose(m.soft_[2], [1 / 3, 2 / 3], atol=1e-8)


def test_laplace_p5_monotone():
    y = np.array([0, -1, -1, -1, 1])
    m = tmod.LaplaceLearning().fit(path_graph(5), y)
    assert np.allclose(m.soft_[:, 0], [1.0, 0.75, 0.5, 0.25, 0.0], atol=1e-8)


def test_poisson_p3():
    m = tmod.PoissonLearning().fit(path_graph(3), P3_Y)
    # class-0 potential u = (0.5, 0, -0.5)
    assert np.allclose(m.soft_[:, 0], [0.5, 0.0, -0.5], atol=1e-8)
    assert np.allclose(m.soft_[:, 1], [-0.5, 0.0, 0.5], atol=1e-8)
    assert m.hard_[1] == 0  # exact tie at the midpoint


def test_poisson_mbo_p3():
    m = tmod.PoissonMBO().fit(path_graph(3), P3_Y)
    assert m.hard_[0] == 0
    assert m.hard_[2] == 1


def test_p_laplace_p3():
    m = tmod.PLaplaceLearning().fit(path_graph(3), P3_Y)
    assert np.allclose(m.soft_[1], [0.5, 0.5], atol=1e-6)


# ---------------------------------------------------------------------------
# dense linear-algebra oracles


def _dense_spreading_oracle(g, y, alpha):
    mask = y >= 0
    k = int(y[mask].max()) + 1
    Y = np.zeros((g.n, k))
    Y[np.flatnonzero(mask), y[mask]] = 1.0
    S = np.asarray(normalized_adjacency(g).todense())
    return (1 - alpha) * np.linalg.solve(np.eye(g.n) - alpha * S, Y)


def _dense_harmonic_oracle(g, y):
    mask = y >= 0
    k = int(y[mask].max()) + 1
    Y = np.zeros((g.n, k))
    Y[np.flatnonzero(mask), y[mask]] = 1.0
    W = np.asarray(g.to_csr().todense())
    D = np.diag(W.sum(axis=1))
    L = D - W
    idx_u = np.flatnonzero(~mask)
    idx_l = np.flatnonzero(mask)
    F = Y.copy()
    if len(idx_u):
        F[idx_u] = np.linalg.solve(
            L[np.ix_(idx_u, idx_u)], W[np.ix_(idx_u, idx_l)] @ Y[idx_l]
        )
    return F


def test_label_spreading_matches_dense_solve():
    rng = np.random.default_rng(10)
    for _ in range(20):
        n = int(rng.integers(8, 30))
        k = int(rng.integers(2, 4))
        g = random_connected_graph(rng, n)
        y = random_labels(rng, n, k)
        m = tmod.LabelSpreading(alpha=0.8, tol=1e-10, max_iter=5000).fit(g, y)
        oracle = _dense_spreading_oracle(g, y, 0.8)
        assert np.max(np.abs(m.soft_ - oracle)) < 1e-6


def test_laplace_matches_dense_solve():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(8, 30))
        k = int(rng.integers(2, 4))
        g = random_connected_graph(rng, n)
        y = random_labels(rng, n, k)
        m = tmod.LaplaceLearning(tol=1e-10).fit(g, y)
        oracle = _dense_harmonic_oracle(g, y)
        assert np.max(np.abs(m.soft_ - oracle)) < 1e-6


def test_p_laplace_p2_equals_laplace():
    rng = np.random.default_rng(12)
    for _ in range(10):
        n = int(rng.integers(8, 25))
        g = random_connected_graph(rng, n)
        y = random_labels(rng, n, 2)
        a = tmod.PLaplaceLearning(p=2.0, outer=3).fit(g, y)
        b = tmod.LaplaceLearning(tol=1e-10).fit(g, y)
        assert np.max(np.abs(a.soft_ - b.soft_)) < 1e-6


# ---------------------------------------------------------------------------
# structural properties


def test_input_validation():
    g = path_graph(3)
    with pytest.raises(tmod.TransductiveError):
        tmod.LabelPropagation().fit(g, np.array([-1, -1, -1]))
    with pytest.raises(tmod.TransductiveError):
        tmod.LabelPropagation().fit(g, np.array([0, -1, 2]))  # class 1 unseen
    with pytest.raises(tmod.TransductiveError):
        tmod.LabelSpreading(alpha=1.5).fit(g, P3_Y)
    with pytest.raises(tmod.TransductiveError):
        tmod.GraphHop().fit(g, P3_Y)  # needs features


def test_laplace_rejects_unlabeled_component():
    g = graph_from_edges(5, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)])
    y = np.array([0, -1, 1, -1, -1])
    with pytest.raises(tmod.TransductiveError):
        tmod.LaplaceLearning().fit(g, y)


def test_poisson_rejects_disconnected():
    g = graph_from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    y = np.array([0, -1, 1, -1])
    with pytest.raises(tmod.TransductiveError) as exc:
        tmod.PoissonLearning().fit(g, y)
    assert "connected" in str(exc.value)


def test_poisson_reweight_priors_scales_columns():
    rng = np.random.default_rng(19)
    g = random_connected_graph(rng, 20)
    y = random_labels(rng, 20, 2, per_class=2)
    plain = tmod.PoissonLearning().fit(g, y)
    weighted = tmod.PoissonLearning(reweight_priors=True).fit(g, y)
    mask = y >= 0
    priors = np.bincount(y[mask], minlength=2) / mask.sum()
    assert np.allclose(weighted.soft_, plain.soft_ * priors[None, :])


def test_poisson_degree_weighted_centering():
    rng = np.random.default_rng(13)
    g = random_connected_graph(rng, 30)
    y = random_labels(rng, 30, 3)
    m = tmod.PoissonLearning().fit(g, y)
    deg = degree_vector(g)
    centered = deg @ m.soft_ / deg.sum()
    assert np.max(np.abs(centered)) < 1e-8


def test_lazy_random_walk_two_cliques():
    edges = [(i, j, 1.0) for i in range(4) for j in range(i + 1, 4)]
    edges += [(i, j, 1.0) for i in range(4, 8) for j in range(i + 1, 8)]
    edges.append((3, 4, 0.01))  # weak bridge
    g = graph_from_edges(8, edges)
    y = np.array([0, -1, -1, -1, -1, -1, -1, 1])
    m = tmod.LazyRandomWalk().fit(g, y)
    assert np.all(m.hard_[:4] == 0)
    assert np.all(m.hard_[4:] == 1)
    assert np.allclose(m.soft_.sum(axis=1), 1.0)


def test_dynamic_label_propagation_first_round_is_one_lp_step():
    rng = np.random.default_rng(14)
    g = random_connected_graph(rng, 15)
    y = random_labels(rng, 15, 2)
    m = tmod.DynamicLabelPropagation(alpha=0.0, rounds=1).fit(g, y)
    mask = y >= 0
    Y = np.zeros((15, 2))
    Y[np.flatnonzero(mask), y[mask]] = 1.0
    expected = np.asarray(transition_row_stochastic(g).todense()) @ Y
    expected[mask] = Y[mask]
    assert np.allclose(m.soft_, expected, atol=1e-12)


def test_dynamic_label_propagation_size_cap():
    class Fake:
        n = 5000
    with pytest.raises(tmod.TransductiveError):
        tmod.DynamicLabelPropagation().fit(Fake(), np.array([0, 1]))


def test_graphhop_rounds_zero_is_clamped_logreg():
    rng = np.random.default_rng(15)
    g = random_connected_graph(rng, 20)
    X = rng.standard_normal((20, 3))
    y = random_labels(rng, 20, 2)
    m = tmod.GraphHop(rounds=0).fit(g, y, features=X)
    mask = y >= 0
    clf = LogisticRegressionGD(l2=1e-4, learning_rate=0.1, epochs=200).fit(
        X[mask], y[mask], n_classes=2
    )
    expected = clf.predict_proba(X)
    Y = np.zeros((20, 2))
    Y[np.flatnonzero(mask), y[mask]] = 1.0
    expected[mask] = Y[mask]
    assert np.allclose(m.soft_, expected, atol=1e-12)


def test_graphhop_two_cliques():
    rng = np.random.default_rng(16)
    X = np.vstack([rng.standard_normal((10, 2)) - 2, rng.standard_normal((10, 2)) + 2])
    edges = [(i, j, 1.0) for i in range(10) for j in range(i + 1, 10)]
    edges += [(i, j, 1.0) for i in range(10, 20) for j in range(i + 1, 20)]
    edges.append((9, 10, 0.01))
    g = graph_from_edges(20, edges)
    y = np.full(20, -1)
    y[0], y[19] = 0, 1
    m = tmod.GraphHop().fit(g, y, features=X)
    assert np.all(m.hard_[:10] == 0)
    assert np.all(m.hard_[10:] == 1)


def test_all_labeled_is_identity():
    g = path_graph(4)
    y = np.array([0, 1, 1, 0])
    for name in ("label_propagation", "laplace", "p_laplace"):
        m = tmod.make_method(name).fit(g, y)
        assert np.array_equal(m.hard_, y)


def test_permutation_equivariance():
    rng = np.random.default_rng(17)
    g = random_connected_graph(rng, 18)
    y = random_labels(rng, 18, 2)
    perm = rng.permutation(18)
    P = sparse.csr_matrix((np.ones(18), (perm, np.arange(18))), shape=(18, 18))
    from semisup.graph import SparseGraph

    g_perm = SparseGraph.from_csr(sparse.csr_matrix(P @ g.to_csr() @ P.T))
    y_perm = np.empty_like(y)
    y_perm[perm] = y
    for cls, kwargs in (
        (tmod.LabelPropagation, {"tol": 1e-12, "max_iter": 3000}),
        (tmod.LabelSpreading, {"tol": 1e-12, "max_iter": 3000}),
        (tmod.LaplaceLearning, {}),
        (tmod.PoissonLearning, {}),
    ):
        a = cls(**kwargs).fit(g, y)
        b = cls(**kwargs).fit(g_perm, y_perm)
        assert np.allclose(a.soft_, b.soft_[perm], atol=1e-6)


def test_determinism_all_methods():
    rng = np.random.default_rng(18)
    g = random_connected_graph(rng, 20)
    X = rng.standard_normal((20, 3))
    y = random_labels(rng, 20, 2)
    for name in tmod.REGISTRY:
        a = tmod.make_method(name).fit(g, y, features=X)
        b = tmod.make_method(name).fit(g, y, features=X)
        assert np.array_equal(a.soft_, b.soft_), name
        assert np.array_equal(a.hard_, b.hard_), name


def test_make_method_unknown():
    with pytest.raises(tmod.TransductiveError):
        tmod.make_method("magic")


def test_result_object():
    m = tmod.LaplaceLearning().fit(path_graph(3), P3_Y)
    r = m.result()
    assert np.array_equal(r.soft, m.soft_)
    assert r.converged == m.converged_
    assert isinstance(r.diagnostics, dict)
