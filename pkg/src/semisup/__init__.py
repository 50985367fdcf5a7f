"""semisup: config-driven semi-supervised classification.

Graph propagation methods (transductive) and pseudo-labeling wrapper
strategies (inductive) behind one declarative YAML pipeline with
deterministic, fingerprinted runs.
"""
from .config import ExperimentConfig, fingerprint, parse_config, validate
from .data import Dataset, load_dataset
from .graph import SparseGraph, build_knn_graph
from .inductive import make_strategy
from .runner import grid_sweep, run_experiment
from .sampling import SplitAssignment, make_split
from .transductive import PropagationResult, make_method

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "ExperimentConfig",
    "PropagationResult",
    "SparseGraph",
    "SplitAssignment",
    "build_knn_graph",
    "fingerprint",
    "grid_sweep",
    "load_dataset",
    "make_method",
    "make_split",
    "make_strategy",
    "parse_config",
    "run_experiment",
    "validate",
    "__version__",
]
