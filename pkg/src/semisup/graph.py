"""Weighted undirected graphs in CSR form: construction, operators, caching.

k-NN construction is exact (brute-force all-pairs); that keeps results
deterministic and is acceptable at desk scale (O(n^2 d) — thousands of points,
not millions).  All propagation methods require a symmetrized graph with no
isolated nodes, which the builders enforce.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse


class GraphError(Exception):
    pass


class IsolatedNodesError(GraphError):
    def __init__(self, node_ids):
        self.node_ids = list(node_ids)
        super().__init__(f"graph has isolated nodes: {self.node_ids}")


class CorruptGraphFileError(GraphError):
    pass


@dataclass
class SparseGraph:
    """Symmetric weighted graph: CSR arrays with sorted columns, no self-loops."""

    n: int
    row_offsets: np.ndarray  # int64, length n+1
    col_indices: np.ndarray  # int64, length nnz
    weights: np.ndarray  # float64, length nnz

    @property
    def nnz(self) -> int:
        return len(self.col_indices)

    def to_csr(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.weights, self.col_indices, self.row_offsets), shape=(self.n, self.n)
        )

    @classmethod
    def from_csr(cls, mat: sparse.csr_matrix) -> "SparseGraph":
        mat = mat.tocsr().copy()
        mat.sort_indices()
        mat.eliminate_zeros()
        return cls(
            n=mat.shape[0],
            row_offsets=mat.indptr.astype(np.int64),
            col_indices=mat.indices.astype(np.int64),
            weights=mat.data.astype(np.float64),
        )

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.weights[lo:hi]

    def check(self) -> None:
        """Assert structural invariants; raises GraphError on violation."""
        if np.any(np.diff(self.row_offsets) < 0):
            raise GraphError("row offsets must be non-decreasing")
        if self.nnz and (self.col_indices.min() < 0 or self.col_indices.max() >= self.n):
            raise GraphError("column index out of range")
        for i in range(self.n):
            cols, _ = self.neighbors(i)
            if np.any(np.diff(cols) <= 0):
                raise GraphError(f"columns not strictly increasing in row {i}")
            if np.any(cols == i):
                raise GraphError(f"self-loop at node {i}")
        if np.any(self.weights <= 0):
            raise GraphError("weights must be positive")
        mat = self.to_csr()
        if (mat != mat.T).nnz != 0:
            raise GraphError("graph is not symmetric")

    def equals(self, other: "SparseGraph") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.weights, other.weights)
        )


# ---------------------------------------------------------------------------
# distances and neighbor structures


def pairwise_distances(features: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if metric == "euclidean":
        sq = np.sum(X * X, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
        np.maximum(d2, 0.0, out=d2)
        return np.sqrt(d2)
    if metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0):
            bad = np.flatnonzero(norms == 0)
            raise GraphError(f"zero-norm vectors under cosine metric: {bad.tolist()}")
        U = X / norms[:, None]
        sim = np.clip(U @ U.T, -1.0, 1.0)
        return 1.0 - sim
    raise GraphError(f"unknown metric {metric!r}")


def knn_neighbors(
    features: np.ndarray, k: int, metric: str = "euclidean"
) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbors per node, self excluded.

    Distance ties break toward the lower node index (stable sort).  Returns
    (indices, distances), each of shape (n, k).
    """
    n = len(features)
    if k >= n:
        raise GraphError(f"k={k} must be < n={n}")
    dist = pairwise_distances(features, metric)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(dist, order, axis=1)


def epsilon_neighbors(
    features: np.ndarray, eps: float, metric: str = "euclidean"
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """All neighbors within distance eps, self excluded; ragged per-node lists."""
    if eps <= 0:
        raise GraphError("eps must be positive")
    dist = pairwise_distances(features, metric)
    np.fill_diagonal(dist, np.inf)
    idx = [np.flatnonzero(row <= eps) for row in dist]
    return idx, [dist[i, cols] for i, cols in enumerate(idx)]


def auto_sigma(knn_distances: np.ndarray) -> float:
    """Self-tuning kernel width: mean distance to the k-th nearest neighbor."""
    sigma = float(np.mean(knn_distances[:, -1]))
    if sigma <= 0:
        raise GraphError("auto sigma is zero (all points identical)")
    return sigma


def gaussian_weights(distances: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        raise GraphError("sigma must be positive")
    d = np.asarray(distances, dtype=np.float64)
    return np.exp(-(d * d) / (2.0 * sigma * sigma))


def symmetrize(
    rows: np.ndarray, cols: np.ndarray, weights: np.ndarray, n: int, mode: str = "union"
) -> SparseGraph:
    """Turn a directed neighbor structure into a symmetric SparseGraph.

    union: keep an edge present in either direction; intersection: require
    both.  Weights of coincident directed edges are averaged.  Self-loops are
    dropped.  Raises IsolatedNodesError if any node ends up without edges
    (propagation is undefined there).
    """
    keep = rows != cols
    A = sparse.csr_matrix(
        (np.asarray(weights, dtype=np.float64)[keep], (rows[keep], cols[keep])), shape=(n, n)
    )
    A.sum_duplicates()
    pattern = A.copy()
    pattern.data = np.ones_like(pattern.data)
    count = pattern + pattern.T  # 1 or 2 per undirected pair
    total = A + A.T
    if mode == "union":
        merged = total.copy()
        merged.data = total.data / count.data
    elif mode == "intersection":
        both = count.copy()
        both.data = (count.data > 1.5).astype(np.float64)
        both.eliminate_zeros()
        merged = total.multiply(both)
        merged = sparse.csr_matrix(merged)
        merged.data = merged.data / 2.0
    else:
        raise GraphError(f"unknown symmetrize mode {mode!r}")
    merged = sparse.csr_matrix(merged)
    merged.eliminate_zeros()
    degrees = np.diff(merged.indptr)
    if np.any(degrees == 0):
        raise IsolatedNodesError(np.flatnonzero(degrees == 0).tolist())
    return SparseGraph.from_csr(merged)


def build_knn_graph(
    features: np.ndarray,
    k: int,
    metric: str = "euclidean",
    weighting: str = "gaussian",
    sigma: float | str = "auto",
    symmetrize_mode: str = "union",
) -> SparseGraph:
    """Exact k-NN graph with binary or gaussian edge weights."""
    idx, dist = knn_neighbors(features, k, metric)
    n = len(features)
    if weighting == "gaussian":
        s = auto_sigma(dist) if sigma == "auto" else float(sigma)
        w = gaussian_weights(dist, s)
    elif weighting == "binary":
        w = np.ones_like(dist)
    else:
        raise GraphError(f"unknown weighting {weighting!r}")
    rows = np.repeat(np.arange(n), k)
    return symmetrize(rows, idx.ravel(), w.ravel(), n, symmetrize_mode)


def build_epsilon_graph(
    features: np.ndarray,
    eps: float,
    metric: str = "euclidean",
    weighting: str = "gaussian",
    sigma: float | str = "auto",
    symmetrize_mode: str = "union",
) -> SparseGraph:
    idx, dists = epsilon_neighbors(features, eps, metric)
    rows = np.concatenate(
        [np.full(len(cols), i, dtype=np.int64) for i, cols in enumerate(idx)]
    ) if idx else np.empty(0, dtype=np.int64)
    cols = np.concatenate(idx) if idx else np.empty(0, dtype=np.int64)
    d = np.concatenate(dists) if dists else np.empty(0)
    if weighting == "gaussian":
        if sigma == "auto":
            s = float(np.mean(d)) if len(d) else 0.0
            if s <= 0:
                raise GraphError("auto sigma is zero (no edges or all points identical)")
        else:
            s = float(sigma)
        w = gaussian_weights(d, s)
    else:
        w = np.ones_like(d)
    return symmetrize(rows, cols, w, len(features), symmetrize_mode)


# ---------------------------------------------------------------------------
# operators


def degree_vector(g: SparseGraph) -> np.ndarray:
    deg = np.zeros(g.n)
    np.add.at(deg, np.repeat(np.arange(g.n), np.diff(g.row_offsets)), g.weights)
    return deg


def _check_degrees(deg: np.ndarray) -> None:
    if np.any(deg <= 0):
        raise IsolatedNodesError(np.flatnonzero(deg <= 0).tolist())


def transition_row_stochastic(g: SparseGraph) -> sparse.csr_matrix:
    """P = D^-1 W; rows sum to 1."""
    deg = degree_vector(g)
    _check_degrees(deg)
    return sparse.diags(1.0 / deg) @ g.to_csr()


def normalized_adjacency(g: SparseGraph) -> sparse.csr_matrix:
    """S = D^-1/2 W D^-1/2."""
    deg = degree_vector(g)
    _check_degrees(deg)
    inv_sqrt = sparse.diags(1.0 / np.sqrt(deg))
    return inv_sqrt @ g.to_csr() @ inv_sqrt


def laplacian(g: SparseGraph, kind: str = "unnormalized") -> sparse.csr_matrix:
    deg = degree_vector(g)
    _check_degrees(deg)
    eye = sparse.identity(g.n, format="csr")
    if kind == "unnormalized":
        return sparse.diags(deg) - g.to_csr()
    if kind == "sym":
        return eye - normalized_adjacency(g)
    if kind == "random_walk":
        return eye - transition_row_stochastic(g)
    raise GraphError(f"unknown laplacian kind {kind!r}")


def connected_components(g: SparseGraph) -> tuple[int, np.ndarray]:
    return sparse.csgraph.connected_components(g.to_csr(), directed=False)


# ---------------------------------------------------------------------------
# cache

_MAGIC = b"MSSCGRPH"
_VERSION = 1


def graph_cache_key(dataset_fingerprint: str, graph_spec_dict: dict) -> str:
    """16-hex key over the dataset fingerprint and the canonical graph spec."""
    blob = dataset_fingerprint.encode("utf-8") + json.dumps(
        graph_spec_dict, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def save_graph(g: SparseGraph, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<QQ", g.n, g.nnz))
        fh.write(g.row_offsets.astype("<u8").tobytes())
        fh.write(g.col_indices.astype("<u4").tobytes())
        fh.write(g.weights.astype("<f8").tobytes())


def load_graph(path: str | Path) -> SparseGraph:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CorruptGraphFileError(f"cannot read {path}: {exc}") from exc
    if len(blob) < 28 or blob[:8] != _MAGIC:
        raise CorruptGraphFileError(f"{path}: bad magic")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != _VERSION:
        raise CorruptGraphFileError(f"{path}: unsupported version {version}")
    n, nnz = struct.unpack_from("<QQ", blob, 12)
    expected = 28 + 8 * (n + 1) + 4 * nnz + 8 * nnz
    if len(blob) != expected:
        raise CorruptGraphFileError(
            f"{path}: length mismatch (got {len(blob)}, expected {expected})"
        )
    off = 28
    row_offsets = np.frombuffer(blob, dtype="<u8", count=n + 1, offset=off).astype(np.int64)
    off += 8 * (n + 1)
    col_indices = np.frombuffer(blob, dtype="<u4", count=nnz, offset=off).astype(np.int64)
    off += 4 * nnz
    weights = np.frombuffer(blob, dtype="<f8", count=nnz, offset=off).astype(np.float64)
    if row_offsets[0] != 0 or row_offsets[-1] != nnz:
        raise CorruptGraphFileError(f"{path}: inconsistent row offsets")
    return SparseGraph(n=int(n), row_offsets=row_offsets, col_indices=col_indices, weights=weights)
