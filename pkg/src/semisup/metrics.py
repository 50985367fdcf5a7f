"""Prediction scoring and the persisted metrics report.

Zero-division convention: a class with no true and no predicted samples has
F1 = 0 and still counts in the macro average.  This deliberately depresses
macro-F1 in low-label-rate runs where a class is never predicted; it is the
deterministic choice and is applied everywhere.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class MetricsError(Exception):
    pass


def _check_pair(y_true, y_pred, k):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) != len(y_pred):
        raise MetricsError(f"length mismatch: {len(y_true)} vs {len(y_pred)}")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if len(arr) and (arr.min() < 0 or arr.max() >= k):
            raise MetricsError(f"{name} labels out of range [0, {k})")
    return y_true, y_pred


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) != len(y_pred):
        raise MetricsError(f"length mismatch: {len(y_true)} vs {len(y_pred)}")
    if len(y_true) == 0:
        raise MetricsError("cannot score an empty set")
    return float(np.mean(y_true == y_pred))


def confusion_matrix(y_true, y_pred, k: int) -> np.ndarray:
    y_true, y_pred = _check_pair(y_true, y_pred, k)
    mat = np.zeros((k, k), dtype=np.int64)
    np.add.at(mat, (y_true, y_pred), 1)
    return mat


def macro_f1(y_true, y_pred, k: int) -> float:
    mat = confusion_matrix(y_true, y_pred, k)
    f1s = np.zeros(k)
    for c in range(k):
        tp = mat[c, c]
        fp = mat[:, c].sum() - tp
        fn = mat[c, :].sum() - tp
        denom = 2 * tp + fp + fn
        f1s[c] = 2.0 * tp / denom if denom > 0 else 0.0
    return float(np.mean(f1s))


_METRICS = {"accuracy": lambda t, p, k: accuracy(t, p), "macro_f1": macro_f1}


@dataclass
class MetricsReport:
    splits: dict[str, dict[str, float]]
    confusion: dict[str, list[list[int]]]
    n_per_split: dict[str, int]
    fingerprint: str = ""
    method: str = ""
    iterations: int | None = None
    residual: float | None = None
    converged: bool | None = None
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "fingerprint": self.fingerprint,
            "method": self.method,
            "splits": self.splits,
            "confusion": self.confusion,
            "n_per_split": self.n_per_split,
        }
        if self.iterations is not None:
            doc["iterations"] = self.iterations
        if self.residual is not None:
            doc["residual"] = self.residual
        if self.converged is not None:
            doc["converged"] = self.converged
        doc.update(self.extras)
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def evaluate(
    predictions: np.ndarray,
    labels: np.ndarray,
    split_roles: np.ndarray,
    role_of: dict[str, int],
    metric_names: list[str],
    splits: list[str],
    k: int,
) -> MetricsReport:
    """Score each requested metric restricted to each requested split."""
    per_split: dict[str, dict[str, float]] = {}
    confusion: dict[str, list[list[int]]] = {}
    n_per_split: dict[str, int] = {}
    for split in splits:
        if split not in role_of:
            raise MetricsError(f"unknown split {split!r}")
        idx = np.flatnonzero(split_roles == role_of[split])
        if len(idx) == 0:
            raise MetricsError(f"requested split {split!r} is empty")
        scores = {}
        for name in metric_names:
            if name not in _METRICS:
                raise MetricsError(f"unknown metric {name!r}")
            scores[name] = _METRICS[name](labels[idx], predictions[idx], k)
        per_split[split] = scores
        confusion[split] = confusion_matrix(labels[idx], predictions[idx], k).tolist()
        n_per_split[split] = int(len(idx))
    return MetricsReport(splits=per_split, confusion=confusion, n_per_split=n_per_split)
