"""Deterministic labeled/unlabeled/validation/test splits.

Stratified carving uses largest-remainder rounding so per-class counts are
deterministic and sum exactly to the global targets.  Class imbalance demotes
labeled samples back to the unlabeled pool rather than deleting them: the
unlabeled data stays available, as the semi-supervised setting assumes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ImbalanceSpec, SamplingSpec
from .data import Dataset
from .rng import generator

TRAIN_LABELED = 0
TRAIN_UNLABELED = 1
VALIDATION = 2
TEST = 3

ROLE_NAMES = ("train_labeled", "train_unlabeled", "validation", "test")


class SamplingError(Exception):
    pass


@dataclass
class SplitAssignment:
    """Per-sample role array; roles partition the index set."""

    roles: np.ndarray  # int8, length n

    def indices(self, role: int) -> np.ndarray:
        return np.flatnonzero(self.roles == role)

    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.roles == r)) for r, name in enumerate(ROLE_NAMES)}


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to `total`, close to the fractional quotas.

    Floors the quotas and hands the remaining units to the largest fractional
    parts; ties go to the lower class index.
    """
    floors = np.floor(quotas).astype(np.int64)
    remainder = int(total - floors.sum())
    if remainder < 0:
        raise SamplingError("quota floors exceed total")
    frac = quotas - floors
    order = np.lexsort((np.arange(len(quotas)), -frac))
    counts = floors.copy()
    for idx in order[:remainder]:
        counts[idx] += 1
    return counts


def _carve(
    pool_per_class: list[np.ndarray], fraction: float, class_sizes: np.ndarray, n_total: int
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Split each per-class pool: first `count_c` go to the carved set."""
    target = int(round(fraction * n_total))
    quotas = fraction * class_sizes.astype(np.float64)
    counts = _largest_remainder(quotas, target)
    carved, rest = [], []
    for pool, count in zip(pool_per_class, counts):
        if count > len(pool):
            raise SamplingError(f"cannot carve {count} samples from a class pool of {len(pool)}")
        carved.append(pool[:count])
        rest.append(pool[count:])
    return carved, rest


def make_split(dataset: Dataset, spec: SamplingSpec, seed: int) -> SplitAssignment:
    """Shuffle, carve test then validation (stratified), then mark labels.

    All randomness comes from the (seed, "split") sub-stream; identical inputs
    give identical role arrays.
    """
    n = dataset.n
    k = dataset.n_classes
    labels = dataset.labels
    rng = generator(seed, "split")
    perm = rng.permutation(n)

    if spec.stratified:
        pools = [perm[labels[perm] == c] for c in range(k)]
    else:
        pools = [perm]
    class_sizes = np.asarray([len(p) for p in pools])
    if spec.stratified and np.any(class_sizes < 2):
        raise SamplingError("stratified split needs >= 2 samples per class")

    test_sets, pools = _carve(pools, spec.test_fraction, class_sizes, n)
    if spec.val_fraction > 0:
        val_sets, pools = _carve(pools, spec.val_fraction, class_sizes, n)
    else:
        val_sets = [np.empty(0, dtype=np.int64) for _ in pools]

    roles = np.full(n, TRAIN_UNLABELED, dtype=np.int8)
    for s in test_sets:
        roles[s] = TEST
    for s in val_sets:
        roles[s] = VALIDATION

    # Labeled marks within the remaining train pool.
    train_pools = pools if spec.stratified else [
        np.concatenate(pools)[labels[np.concatenate(pools)] == c] for c in range(k)
    ]
    train_sizes = np.asarray([len(p) for p in train_pools])
    pool_total = int(train_sizes.sum())
    if spec.labeled_per_class is not None:
        counts = np.full(k, spec.labeled_per_class, dtype=np.int64)
    else:
        target = int(round(spec.labeled_fraction * pool_total))
        counts = _largest_remainder(
            spec.labeled_fraction * train_sizes.astype(np.float64), target
        )
    for c, (pool, count) in enumerate(zip(train_pools, counts)):
        if count > len(pool):
            raise SamplingError(
                f"labeled count {count} exceeds class {c} train pool of {len(pool)}"
            )
        if count < 1:
            raise SamplingError(f"class {c} would have no labeled training sample")
        roles[pool[:count]] = TRAIN_LABELED

    assignment = SplitAssignment(roles=roles)
    if len(assignment.indices(TEST)) == 0:
        raise SamplingError("test set is empty")
    return assignment


def apply_imbalance(
    assignment: SplitAssignment, dataset: Dataset, imbalance: ImbalanceSpec, seed: int
) -> SplitAssignment:
    """Demote labeled samples to unlabeled so class counts follow a profile.

    exponential: class c keeps ceil(n_max * ratio^(-c/(k-1))).
    step: the first ceil(k/2) classes keep n_max, the rest ceil(n_max/ratio).
    """
    k = dataset.n_classes
    labels = dataset.labels
    roles = assignment.roles.copy()
    labeled = np.flatnonzero(roles == TRAIN_LABELED)
    counts = np.bincount(labels[labeled], minlength=k)
    n_max = int(counts.max())
    if imbalance.kind == "exponential":
        keep = np.array(
            [math.ceil(n_max * imbalance.ratio ** (-c / (k - 1))) for c in range(k)]
        )
    elif imbalance.kind == "step":
        half = math.ceil(k / 2)
        keep = np.array(
            [n_max if c < half else math.ceil(n_max / imbalance.ratio) for c in range(k)]
        )
    else:
        raise SamplingError(f"unknown imbalance kind {imbalance.kind!r}")
    if np.any(keep < 1):
        raise SamplingError("imbalance would leave a class with no labeled sample")

    rng = generator(seed, "imbalance")
    for c in range(k):
        members = labeled[labels[labeled] == c]
        excess = len(members) - min(keep[c], len(members))
        if excess > 0:
            demote = rng.permutation(members)[:excess]
            roles[demote] = TRAIN_UNLABELED
    return SplitAssignment(roles=roles)
