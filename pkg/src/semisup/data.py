"""Unified dataset interface: tabular files, feature matrices, native graphs,
and synthetic generators.

Non-tabular modalities (image/text/audio) enter only as precomputed feature
matrices via the ``matrix`` source; there is no decoding or encoding here.
Label encoding follows first appearance in the file so class_names round-trip
the source faithfully.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DatasetSpec
from .graph import SparseGraph, symmetrize
from .rng import generator


class DataError(Exception):
    pass


@dataclass
class Dataset:
    """Immutable sample collection; at least one of features / native_graph set."""

    n: int
    features: np.ndarray | None
    labels: np.ndarray  # int64 in [0, k)
    class_names: list[str]
    native_graph: SparseGraph | None
    source_fingerprint: str

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def check(self) -> None:
        if self.features is None and self.native_graph is None:
            raise DataError("dataset needs features or a native graph")
        if self.features is not None and not np.all(np.isfinite(self.features)):
            raise DataError("features contain NaN/Inf")
        counts = np.bincount(self.labels, minlength=self.n_classes)
        if np.any(counts == 0):
            missing = np.flatnonzero(counts == 0).tolist()
            raise DataError(f"classes with no samples: {missing}")


def _file_fingerprint(*paths: str | Path) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()[:16]


def _params_fingerprint(tag: str, **params) -> str:
    blob = tag + "".join(f"|{k}={params[k]!r}" for k in sorted(params))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# file loaders


def _encode_labels(raw: list[str]) -> tuple[np.ndarray, list[str]]:
    class_names: list[str] = []
    index: dict[str, int] = {}
    encoded = np.empty(len(raw), dtype=np.int64)
    for i, value in enumerate(raw):
        if value not in index:
            index[value] = len(class_names)
            class_names.append(value)
        encoded[i] = index[value]
    if len(class_names) < 2:
        raise DataError(f"need at least 2 classes, found {len(class_names)}")
    return encoded, class_names


def load_tabular_csv(path: str | Path, label_column: str) -> Dataset:
    """CSV with a header row; all non-label columns must be numeric."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        label_idx = header.index(label_column)
        feature_cols = [j for j in range(len(header)) if j != label_idx]
        rows: list[list[float]] = []
        labels_raw: list[str] = []
        for i, record in enumerate(reader):
            if len(record) != len(header):
                raise DataError(f"{path}: row {i + 2} has {len(record)} cells, expected {len(header)}")
            values = []
            for j in feature_cols:
                try:
                    values.append(float(record[j]))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell at row {i + 2}, column {header[j]!r}"
                    ) from None
            rows.append(values)
            labels_raw.append(record[label_idx])
    if not rows:
        raise DataError(f"{path}: no data rows")
    labels, class_names = _encode_labels(labels_raw)
    features = np.asarray(rows, dtype=np.float64)
    ds = Dataset(
        n=len(rows),
        features=features,
        labels=labels,
        class_names=class_names,
        native_graph=None,
        source_fingerprint=_file_fingerprint(path),
    )
    ds.check()
    return ds


def _read_labels_file(path: str | Path, n: int) -> tuple[np.ndarray, list[str]]:
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if len(lines) != n:
        raise DataError(f"{path}: {len(lines)} labels for {n} samples")
    try:
        raw = [int(ln) for ln in lines]
    except ValueError as exc:
        raise DataError(f"{path}: labels must be integers: {exc}") from None
    if min(raw) < 0:
        raise DataError(f"{path}: negative label")
    k = max(raw) + 1
    return np.asarray(raw, dtype=np.int64), [str(c) for c in range(k)]


def load_matrix(features_path: str | Path, labels_path: str | Path) -> Dataset:
    """Precomputed feature matrix (headerless CSV) plus a labels file."""
    try:
        features = np.loadtxt(features_path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DataError(f"{features_path}: {exc}") from None
    labels, class_names = _read_labels_file(labels_path, len(features))
    ds = Dataset(
        n=len(features),
        features=features,
        labels=labels,
        class_names=class_names,
        native_graph=None,
        source_fingerprint=_file_fingerprint(features_path, labels_path),
    )
    ds.check()
    return ds


def load_edge_list(
    edges_path: str | Path,
    labels_path: str | Path,
    features_path: str | Path | None = None,
) -> Dataset:
    """Native graph from `src dst [weight]` lines (0-based ids).

    The graph is symmetrized by union; coincident directed edges average
    their weights; self-loops are dropped.
    """
    rows, cols, weights = [], [], []
    for lineno, line in enumerate(Path(edges_path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) not in (2, 3):
            raise DataError(f"{edges_path}:{lineno}: expected `src dst [weight]`")
        try:
            src, dst = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise DataError(f"{edges_path}:{lineno}: {exc}") from None
        if src < 0 or dst < 0:
            raise DataError(f"{edges_path}:{lineno}: negative node id")
        if w < 0:
            raise DataError(f"{edges_path}:{lineno}: negative weight")
        rows.append(src)
        cols.append(dst)
        weights.append(w)

    labels_lines = [
        ln.strip() for ln in Path(labels_path).read_text(encoding="utf-8").splitlines() if ln.strip()
    ]
    n = len(labels_lines)
    labels, class_names = _read_labels_file(labels_path, n)
    if rows and max(max(rows), max(cols)) >= n:
        raise DataError(
            f"{edges_path}: node id {max(max(rows), max(cols))} >= n={n} (label count)"
        )
    g = symmetrize(
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(weights, dtype=np.float64),
        n,
        "union",
    )
    features = None
    paths = [edges_path, labels_path]
    if features_path is not None:
        features = np.loadtxt(features_path, delimiter=",", dtype=np.float64, ndmin=2)
        if len(features) != n:
            raise DataError(f"{features_path}: {len(features)} rows for {n} nodes")
        paths.append(features_path)
    ds = Dataset(
        n=n,
        features=features,
        labels=labels,
        class_names=class_names,
        native_graph=g,
        source_fingerprint=_file_fingerprint(*paths),
    )
    ds.check()
    return ds


# ---------------------------------------------------------------------------
# synthetic generators


def gen_two_moons(n: int, noise_std: float, seed: int) -> Dataset:
    """Two interleaved half-circles of radius 1, n/2 points each.

    The second moon is offset by (1, -0.5); isotropic Gaussian noise with
    standard deviation noise_std is added to every point.
    """
    if n % 2 != 0:
        raise DataError("two_moons requires an even n")
    if noise_std < 0:
        raise DataError("noise_std must be >= 0")
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), -np.sin(t) - 0.5])
    X = np.vstack([upper, lower])
    rng = generator(seed, "two_moons")
    X = X + noise_std * rng.standard_normal(X.shape)
    labels = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(half, dtype=np.int64)])
    ds = Dataset(
        n=n,
        features=X,
        labels=labels,
        class_names=["moon_upper", "moon_lower"],
        native_graph=None,
        source_fingerprint=_params_fingerprint("two_moons", n=n, noise_std=noise_std, seed=seed),
    )
    ds.check()
    return ds


def gen_blobs(n: int, centers: list[list[float]], std: float, seed: int) -> Dataset:
    """Isotropic Gaussian clusters, one class per center, n split evenly."""
    k = len(centers)
    if k < 2:
        raise DataError("blobs needs at least 2 centers")
    if std < 0:
        raise DataError("std must be >= 0")
    counts = [n // k + (1 if c < n % k else 0) for c in range(k)]
    if min(counts) == 0:
        raise DataError(f"n={n} too small for {k} centers")
    rng = generator(seed, "blobs")
    parts, labels = [], []
    for c, (center, m) in enumerate(zip(centers, counts)):
        center = np.asarray(center, dtype=np.float64)
        parts.append(center[None, :] + std * rng.standard_normal((m, len(center))))
        labels.append(np.full(m, c, dtype=np.int64))
    ds = Dataset(
        n=n,
        features=np.vstack(parts),
        labels=np.concatenate(labels),
        class_names=[f"blob_{c}" for c in range(k)],
        native_graph=None,
        source_fingerprint=_params_fingerprint(
            "blobs", n=n, centers=tuple(map(tuple, centers)), std=std, seed=seed
        ),
    )
    ds.check()
    return ds


def gen_sbm(block_sizes: list[int], p_in: float, p_out: float, seed: int) -> Dataset:
    """Stochastic block model: undirected simple graph, labels = block ids."""
    if any(b <= 0 for b in block_sizes):
        raise DataError("empty block in SBM")
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise DataError("p_in and p_out must be in [0, 1]")
    n = sum(block_sizes)
    labels = np.concatenate(
        [np.full(b, c, dtype=np.int64) for c, b in enumerate(block_sizes)]
    )
    rng = generator(seed, "sbm")
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    rows = np.concatenate([iu[keep], ju[keep]])
    cols = np.concatenate([ju[keep], iu[keep]])
    g = symmetrize(rows, cols, np.ones(len(rows)), n, "union")
    ds = Dataset(
        n=n,
        features=None,
        labels=labels,
        class_names=[f"block_{c}" for c in range(len(block_sizes))],
        native_graph=g,
        source_fingerprint=_params_fingerprint(
            "sbm", block_sizes=tuple(block_sizes), p_in=p_in, p_out=p_out, seed=seed
        ),
    )
    ds.check()
    return ds


# ---------------------------------------------------------------------------
# preprocessing


def standardize_features(dataset: Dataset) -> Dataset:
    """Per-column zero mean, unit variance (population 1/n variance).

    Zero-variance columns map to all-zeros.  Idempotent on already
    standardized data.
    """
    if dataset.features is None:
        raise DataError("standardize requires features")
    X = dataset.features
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population std
    out = np.zeros_like(X)
    nz = std > 0
    out[:, nz] = (X[:, nz] - mean[nz]) / std[nz]
    return Dataset(
        n=dataset.n,
        features=out,
        labels=dataset.labels,
        class_names=dataset.class_names,
        native_graph=dataset.native_graph,
        source_fingerprint=dataset.source_fingerprint,
    )


# ---------------------------------------------------------------------------
# spec-driven entry point


def load_dataset(spec: DatasetSpec, seed: int) -> Dataset:
    """Load per DatasetSpec; standardization is applied here when requested."""
    if spec.source == "csv":
        ds = load_tabular_csv(spec.path, spec.label_column)
    elif spec.source == "matrix":
        ds = load_matrix(spec.features_path, spec.labels_path)
    elif spec.source == "edgelist":
        ds = load_edge_list(spec.edges_path, spec.labels_path, spec.features_path)
    elif spec.source == "synthetic":
        syn = spec.synthetic
        params = dict(syn.params)
        if syn.name == "two_moons":
            ds = gen_two_moons(
                n=int(params.pop("n", 600)),
                noise_std=float(params.pop("noise_std", 0.1)),
                seed=seed,
            )
        elif syn.name == "blobs":
            centers = params.pop("centers", None)
            if centers is None:
                raise DataError("blobs generator requires 'centers'")
            if not isinstance(centers[0], list):  # flat pair list from config scalars
                centers = [centers[i : i + 2] for i in range(0, len(centers), 2)]
            ds = gen_blobs(
                n=int(params.pop("n", 200)),
                centers=centers,
                std=float(params.pop("std", 1.0)),
                seed=seed,
            )
        elif syn.name == "sbm":
            sizes = params.pop("block_sizes", None)
            if sizes is None:
                raise DataError("sbm generator requires 'block_sizes'")
            ds = gen_sbm(
                block_sizes=[int(b) for b in sizes],
                p_in=float(params.pop("p_in", 0.3)),
                p_out=float(params.pop("p_out", 0.01)),
                seed=seed,
            )
        else:
            raise DataError(f"unknown generator {syn.name!r}")
        if params:
            raise DataError(f"unknown generator parameters: {sorted(params)}")
    else:
        raise DataError(f"unknown source {spec.source!r}")
    if spec.standardize and ds.features is not None:
        ds = standardize_features(ds)
    return ds
