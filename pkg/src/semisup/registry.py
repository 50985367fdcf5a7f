"""Method registries: the exact config-facing names and default parameters.

Transductive methods operate on a graph over all samples; inductive strategies
wrap a supervised base learner.  Defaults declared here are materialized into
the canonical config (and therefore into fingerprints) at parse time.
"""
from __future__ import annotations

# Parameters shared by the selectable base learners.  Strategies that accept a
# ``base`` parameter expose all of them so any base can be configured.
_BASE_LEARNER_PARAMS: dict[str, object] = {
    "knn_k": 5,
    "knn_metric": "euclidean",
    "logreg_l2": 1e-4,
    "logreg_learning_rate": 0.1,
    "logreg_epochs": 200,
    "stump_rounds": 50,
}

BASE_LEARNER_NAMES = ("knn", "logreg", "stump_boost")

TRANSDUCTIVE_PARAMS: dict[str, dict[str, object]] = {
    "label_propagation": {"tol": 1e-6, "max_iter": 1000},
    "label_spreading": {"alpha": 0.9, "tol": 1e-6, "max_iter": 1000},
    "laplace": {"tol": 1e-8, "max_iter": 1000, "class_mass_normalization": False},
    "lazy_random_walk": {"gamma": 0.5, "steps": 50},
    "dynamic_label_propagation": {"alpha": 0.05, "knn_k": 5, "rounds": 20},
    "poisson": {"tol": 1e-8, "max_iter": 2000, "reweight_priors": False},
    "poisson_mbo": {"outer": 20, "inner": 40, "dt": 0.5, "mu": 1.0},
    "p_laplace": {"p": 3.0, "outer": 50, "eps": 1e-8, "tol": 1e-6},
    "graphhop": {
        "rounds": 10,
        "hops": 2,
        "logreg_l2": 1e-4,
        "logreg_learning_rate": 0.1,
        "logreg_epochs": 200,
    },
}

INDUCTIVE_PARAMS: dict[str, dict[str, object]] = {
    "self_training": {"base": "knn", "tau": 0.95, "max_rounds": 10, **_BASE_LEARNER_PARAMS},
    "tri_training": {"base": "knn", **_BASE_LEARNER_PARAMS},
    "setred": {
        "base": "knn",
        "theta": 0.1,
        "max_rounds": 10,
        "edit_k": 3,
        "per_round": 10,
        **_BASE_LEARNER_PARAMS,
    },
    # Democratic co-learning runs a fixed committee of the three built-in
    # learners, so it takes no ``base`` parameter.
    "democratic": dict(_BASE_LEARNER_PARAMS),
    "assemble": {"base": "stump_boost", "rounds": 20, "beta": 0.9, **_BASE_LEARNER_PARAMS},
}

METRIC_NAMES = ("accuracy", "macro_f1")
SPLIT_NAMES = ("train_labeled", "train_unlabeled", "validation", "test")
EVAL_SPLIT_NAMES = ("validation", "test", "train_unlabeled")


def params_for(task: str, name: str) -> dict[str, object] | None:
    table = TRANSDUCTIVE_PARAMS if task == "transductive" else INDUCTIVE_PARAMS
    defaults = table.get(name)
    return dict(defaults) if defaults is not None else None
