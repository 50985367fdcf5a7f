"""Experiment configuration: parsing, validation, canonical form, fingerprint.

A run is declared by a single YAML document with top-level keys
``seed, task, dataset, sampling, graph, method, evaluation, sweep, output``.
Parsing is strict: unknown keys are errors, and all defaults are materialized
into the parsed config so the fingerprint covers them.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from . import registry


class ConfigError(Exception):
    """Raised when a config document cannot be parsed into a valid structure."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class ValidationIssue:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass
class SyntheticSpec:
    name: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class DatasetSpec:
    source: str
    path: str | None = None
    label_column: str | None = None
    features_path: str | None = None
    labels_path: str | None = None
    edges_path: str | None = None
    synthetic: SyntheticSpec | None = None
    standardize: bool = True


@dataclass
class ImbalanceSpec:
    kind: str
    ratio: float


@dataclass
class SamplingSpec:
    labeled_per_class: int | None = None
    labeled_fraction: float | None = None
    val_fraction: float = 0.0
    test_fraction: float = 0.2
    stratified: bool = True
    imbalance: ImbalanceSpec | None = None


@dataclass
class GraphSpec:
    builder: str = "knn"
    k: int = 10
    eps: float | None = None
    metric: str = "euclidean"
    weighting: str = "gaussian"
    sigma: float | str = "auto"
    symmetrize: str = "union"


@dataclass
class MethodSpec:
    name: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class EvalSpec:
    metrics: list[str] = field(default_factory=lambda: ["accuracy", "macro_f1"])
    splits: list[str] = field(default_factory=lambda: ["test"])


@dataclass
class SweepSpec:
    grid: dict[str, list[Any]]
    select_metric: str = "accuracy"
    select_split: str = "validation"


@dataclass
class OutputSpec:
    run_dir: str = "runs"
    cache_dir: str = "cache"


@dataclass
class ExperimentConfig:
    seed: int
    task: str
    dataset: DatasetSpec
    sampling: SamplingSpec
    method: MethodSpec
    graph: GraphSpec | None = None
    evaluation: EvalSpec = field(default_factory=EvalSpec)
    sweep: SweepSpec | None = None
    output: OutputSpec = field(default_factory=OutputSpec)


# ---------------------------------------------------------------------------
# strict mapping access


def _require_mapping(node: Any, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(path, f"expected a mapping, got {type(node).__name__}")
    for key in node:
        if not isinstance(key, str):
            raise ConfigError(path, f"non-string key {key!r}")
    return node


class _Section:
    """Dict view that tracks consumed keys so leftovers can be reported."""

    def __init__(self, node: Any, path: str):
        self.data = _require_mapping(node, path)
        self.path = path
        self._seen: set[str] = set()

    def child_path(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return key in self.data and self.data[key] is not None

    def take(self, key: str, default: Any = None) -> Any:
        self._seen.add(key)
        value = self.data.get(key, default)
        return default if value is None else value

    def take_required(self, key: str) -> Any:
        if not self.has(key):
            raise ConfigError(self.child_path(key), "missing required key")
        return self.take(key)

    def finish(self) -> None:
        unknown = sorted(set(self.data) - self._seen)
        if unknown:
            raise ConfigError(self.child_path(unknown[0]), "unknown key")


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _as_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _as_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {value!r}")
    return value


def _as_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected a boolean, got {value!r}")
    return value


def _as_enum(value: Any, path: str, choices: tuple[str, ...]) -> str:
    value = _as_str(value, path)
    if value not in choices:
        raise ConfigError(path, f"must be one of {list(choices)}, got {value!r}")
    return value


def _as_scalar(value: Any, path: str) -> Any:
    if isinstance(value, (bool, int, float, str)):
        return value
    raise ConfigError(path, f"expected a scalar, got {type(value).__name__}")


# ---------------------------------------------------------------------------
# section parsers


def _parse_dataset(node: Any, path: str) -> DatasetSpec:
    sec = _Section(node, path)
    source = _as_enum(
        sec.take_required("source"), sec.child_path("source"),
        ("csv", "matrix", "edgelist", "synthetic"),
    )
    spec = DatasetSpec(source=source)
    if sec.has("path"):
        spec.path = _as_str(sec.take("path"), sec.child_path("path"))
    if sec.has("label_column"):
        spec.label_column = _as_str(sec.take("label_column"), sec.child_path("label_column"))
    for key in ("features_path", "labels_path", "edges_path"):
        if sec.has(key):
            setattr(spec, key, _as_str(sec.take(key), sec.child_path(key)))
    if sec.has("synthetic"):
        sub = _Section(sec.take("synthetic"), sec.child_path("synthetic"))
        name = _as_enum(
            sub.take_required("name"), sub.child_path("name"), ("two_moons", "blobs", "sbm")
        )
        params: dict[str, Any] = {}
        if sub.has("params"):
            pnode = _require_mapping(sub.take("params"), sub.child_path("params"))
            for k, v in pnode.items():
                if isinstance(v, list):
                    params[k] = [_as_scalar(x, f"{sub.child_path('params')}.{k}") for x in v]
                else:
                    params[k] = _as_scalar(v, f"{sub.child_path('params')}.{k}")
        spec.synthetic = SyntheticSpec(name=name, params=params)
        sub.finish()
    spec.standardize = _as_bool(sec.take("standardize", True), sec.child_path("standardize"))
    sec.finish()

    required = {
        "csv": ("path", "label_column"),
        "matrix": ("features_path", "labels_path"),
        "edgelist": ("edges_path", "labels_path"),
        "synthetic": (),
    }[source]
    for key in required:
        if getattr(spec, key) is None:
            raise ConfigError(f"{path}.{key}", f"required for source {source!r}")
    if source == "synthetic" and spec.synthetic is None:
        raise ConfigError(f"{path}.synthetic", "required for source 'synthetic'")
    return spec


def _parse_sampling(node: Any, path: str) -> SamplingSpec:
    sec = _Section(node, path)
    spec = SamplingSpec()
    if sec.has("labeled_per_class"):
        spec.labeled_per_class = _as_int(
            sec.take("labeled_per_class"), sec.child_path("labeled_per_class")
        )
    if sec.has("labeled_fraction"):
        spec.labeled_fraction = _as_float(
            sec.take("labeled_fraction"), sec.child_path("labeled_fraction")
        )
    spec.val_fraction = _as_float(sec.take("val_fraction", 0.0), sec.child_path("val_fraction"))
    spec.test_fraction = _as_float(sec.take("test_fraction", 0.2), sec.child_path("test_fraction"))
    spec.stratified = _as_bool(sec.take("stratified", True), sec.child_path("stratified"))
    if sec.has("imbalance"):
        sub = _Section(sec.take("imbalance"), sec.child_path("imbalance"))
        kind = _as_enum(sub.take_required("kind"), sub.child_path("kind"), ("exponential", "step"))
        ratio = _as_float(sub.take_required("ratio"), sub.child_path("ratio"))
        sub.finish()
        spec.imbalance = ImbalanceSpec(kind=kind, ratio=ratio)
    sec.finish()
    return spec


def _parse_graph(node: Any, path: str) -> GraphSpec:
    sec = _Section(node, path)
    spec = GraphSpec()
    spec.builder = _as_enum(
        sec.take("builder", "knn"), sec.child_path("builder"), ("knn", "epsilon", "native")
    )
    spec.k = _as_int(sec.take("k", 10), sec.child_path("k"))
    if sec.has("eps"):
        spec.eps = _as_float(sec.take("eps"), sec.child_path("eps"))
    spec.metric = _as_enum(
        sec.take("metric", "euclidean"), sec.child_path("metric"), ("euclidean", "cosine")
    )
    spec.weighting = _as_enum(
        sec.take("weighting", "gaussian"), sec.child_path("weighting"), ("binary", "gaussian")
    )
    sigma = sec.take("sigma", "auto")
    if isinstance(sigma, str):
        spec.sigma = _as_enum(sigma, sec.child_path("sigma"), ("auto",))
    else:
        spec.sigma = _as_float(sigma, sec.child_path("sigma"))
    spec.symmetrize = _as_enum(
        sec.take("symmetrize", "union"), sec.child_path("symmetrize"), ("union", "intersection")
    )
    sec.finish()
    return spec


def _parse_method(node: Any, path: str, task: str) -> MethodSpec:
    sec = _Section(node, path)
    name = _as_str(sec.take_required("name"), sec.child_path("name"))
    params: dict[str, Any] = {}
    if sec.has("params"):
        pnode = _require_mapping(sec.take("params"), sec.child_path("params"))
        for k, v in pnode.items():
            params[k] = _as_scalar(v, f"{sec.child_path('params')}.{k}")
    sec.finish()
    defaults = registry.params_for(task, name)
    if defaults is not None:
        # Materialize defaults (fingerprint-honest) and coerce ints that fill
        # float-typed parameters.
        merged = dict(defaults)
        for k, v in params.items():
            if k in merged and isinstance(merged[k], float) and isinstance(v, int):
                v = float(v)
            merged[k] = v
        params = merged
    return MethodSpec(name=name, params=params)


def _parse_evaluation(node: Any, path: str) -> EvalSpec:
    sec = _Section(node, path)
    spec = EvalSpec()
    if sec.has("metrics"):
        raw = sec.take("metrics")
        if not isinstance(raw, list) or not raw:
            raise ConfigError(sec.child_path("metrics"), "expected a non-empty list")
        spec.metrics = [
            _as_enum(m, sec.child_path("metrics"), registry.METRIC_NAMES) for m in raw
        ]
    else:
        sec.take("metrics")
    if sec.has("splits"):
        raw = sec.take("splits")
        if not isinstance(raw, list) or not raw:
            raise ConfigError(sec.child_path("splits"), "expected a non-empty list")
        spec.splits = [
            _as_enum(s, sec.child_path("splits"), registry.EVAL_SPLIT_NAMES) for s in raw
        ]
    else:
        sec.take("splits")
    sec.finish()
    return spec


def _parse_sweep(node: Any, path: str) -> SweepSpec:
    sec = _Section(node, path)
    grid_node = _require_mapping(sec.take_required("grid"), sec.child_path("grid"))
    grid: dict[str, list[Any]] = {}
    for k, v in grid_node.items():
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{sec.child_path('grid')}.{k}", "expected a non-empty list")
        grid[k] = [_as_scalar(x, f"{sec.child_path('grid')}.{k}") for x in v]
    if not grid:
        raise ConfigError(sec.child_path("grid"), "grid must not be empty")
    select_metric = _as_enum(
        sec.take("select_metric", "accuracy"),
        sec.child_path("select_metric"),
        registry.METRIC_NAMES,
    )
    select_split = _as_enum(
        sec.take("select_split", "validation"),
        sec.child_path("select_split"),
        registry.EVAL_SPLIT_NAMES,
    )
    sec.finish()
    return SweepSpec(grid=grid, select_metric=select_metric, select_split=select_split)


def _parse_output(node: Any, path: str) -> OutputSpec:
    sec = _Section(node, path)
    spec = OutputSpec()
    spec.run_dir = _as_str(sec.take("run_dir", "runs"), sec.child_path("run_dir"))
    spec.cache_dir = _as_str(sec.take("cache_dir", "cache"), sec.child_path("cache_dir"))
    sec.finish()
    return spec


def parse_config(text: str) -> ExperimentConfig:
    """Parse a YAML document into a fully-defaulted ExperimentConfig.

    Raises ConfigError on syntax errors, unknown keys, missing required keys
    and type mismatches.  Cross-field invariants are checked by validate().
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError("", f"YAML syntax error{where}: {exc}") from exc
    sec = _Section(doc, "")

    seed = _as_int(sec.take_required("seed"), "seed")
    if seed < 0 or seed >= 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    task = _as_enum(sec.take_required("task"), "task", ("inductive", "transductive"))
    dataset = _parse_dataset(sec.take_required("dataset"), "dataset")
    sampling = _parse_sampling(sec.take_required("sampling"), "sampling")
    graph = _parse_graph(sec.take("graph"), "graph") if sec.has("graph") else None
    sec.take("graph")
    method = _parse_method(sec.take_required("method"), "method", task)
    evaluation = (
        _parse_evaluation(sec.take("evaluation"), "evaluation")
        if sec.has("evaluation")
        else EvalSpec()
    )
    sec.take("evaluation")
    sweep = _parse_sweep(sec.take("sweep"), "sweep") if sec.has("sweep") else None
    sec.take("sweep")
    output = _parse_output(sec.take("output"), "output") if sec.has("output") else OutputSpec()
    sec.take("output")
    sec.finish()

    return ExperimentConfig(
        seed=seed,
        task=task,
        dataset=dataset,
        sampling=sampling,
        graph=graph,
        method=method,
        evaluation=evaluation,
        sweep=sweep,
        output=output,
    )


# ---------------------------------------------------------------------------
# validation


def validate(config: ExperimentConfig) -> list[ValidationIssue]:
    """Cross-field invariant checks. Empty list iff the config is runnable."""
    issues: list[ValidationIssue] = []

    table = (
        registry.TRANSDUCTIVE_PARAMS
        if config.task == "transductive"
        else registry.INDUCTIVE_PARAMS
    )
    if config.method.name not in table:
        issues.append(
            ValidationIssue(
                "method.name",
                f"{config.method.name!r} is not a registered {config.task} method",
            )
        )
    else:
        schema = table[config.method.name]
        for key in config.method.params:
            if key not in schema:
                issues.append(
                    ValidationIssue(
                        f"method.params.{key}",
                        f"unknown parameter for method {config.method.name!r}",
                    )
                )
        if "base" in schema:
            base = config.method.params.get("base", schema["base"])
            if base not in registry.BASE_LEARNER_NAMES:
                issues.append(
                    ValidationIssue(
                        "method.params.base",
                        f"unknown base learner {base!r}",
                    )
                )

    if config.task == "transductive":
        if config.graph is None and config.dataset.source != "edgelist":
            issues.append(
                ValidationIssue("graph", "transductive task requires graph spec")
            )
        if (
            config.graph is not None
            and config.graph.builder == "native"
            and config.dataset.source != "edgelist"
        ):
            issues.append(
                ValidationIssue("graph.builder", "'native' requires a native graph dataset")
            )
        if config.graph is not None and config.graph.builder == "epsilon" and config.graph.eps is None:
            issues.append(ValidationIssue("graph.eps", "required for builder 'epsilon'"))

    s = config.sampling
    n_set = (s.labeled_per_class is not None) + (s.labeled_fraction is not None)
    if n_set != 1:
        issues.append(
            ValidationIssue(
                "sampling", "exactly one of labeled_per_class / labeled_fraction must be set"
            )
        )
    if s.labeled_per_class is not None and s.labeled_per_class < 1:
        issues.append(ValidationIssue("sampling.labeled_per_class", "must be positive"))
    if s.labeled_fraction is not None and not (0.0 < s.labeled_fraction <= 1.0):
        issues.append(ValidationIssue("sampling.labeled_fraction", "must be in (0, 1]"))
    if not (0.0 <= s.val_fraction < 1.0):
        issues.append(ValidationIssue("sampling.val_fraction", "must be in [0, 1)"))
    if not (0.0 < s.test_fraction < 1.0):
        issues.append(ValidationIssue("sampling.test_fraction", "must be in (0, 1)"))
    if s.val_fraction + s.test_fraction >= 1.0:
        issues.append(ValidationIssue("sampling", "val_fraction + test_fraction must be < 1"))
    if s.imbalance is not None and s.imbalance.ratio < 1.0:
        issues.append(ValidationIssue("sampling.imbalance.ratio", "must be >= 1"))

    d = config.dataset
    for key in ("path", "features_path", "labels_path", "edges_path"):
        value = getattr(d, key)
        if value is not None and not Path(value).exists():
            issues.append(ValidationIssue(f"dataset.{key}", f"file not found: {value}"))

    if config.graph is not None:
        g = config.graph
        if g.k < 1:
            issues.append(ValidationIssue("graph.k", "must be positive"))
        if g.eps is not None and g.eps <= 0:
            issues.append(ValidationIssue("graph.eps", "must be positive"))
        if isinstance(g.sigma, float) and g.sigma <= 0:
            issues.append(ValidationIssue("graph.sigma", "must be positive"))

    if config.sweep is not None:
        schema = table.get(config.method.name, {})
        for name in config.sweep.grid:
            if name not in schema:
                issues.append(
                    ValidationIssue(
                        f"sweep.grid.{name}",
                        f"parameter not in method {config.method.name!r} schema",
                    )
                )
        if config.sweep.select_split not in config.evaluation.splits:
            issues.append(
                ValidationIssue(
                    "sweep.select_split",
                    f"{config.sweep.select_split!r} is not among evaluation.splits",
                )
            )
        if config.sweep.select_metric not in config.evaluation.metrics:
            issues.append(
                ValidationIssue(
                    "sweep.select_metric",
                    f"{config.sweep.select_metric!r} is not among evaluation.metrics",
                )
            )
        if config.sweep.select_split == "validation" and s.val_fraction == 0.0:
            issues.append(
                ValidationIssue(
                    "sweep.select_split",
                    "selection on validation requires sampling.val_fraction > 0",
                )
            )

    return issues


# ---------------------------------------------------------------------------
# canonical form and fingerprint


def to_dict(config: ExperimentConfig) -> dict[str, Any]:
    """Plain-dict view with all defaults materialized; optional blocks omitted."""
    out: dict[str, Any] = {
        "seed": config.seed,
        "task": config.task,
        "dataset": {
            "source": config.dataset.source,
            "standardize": config.dataset.standardize,
        },
        "sampling": {
            "val_fraction": config.sampling.val_fraction,
            "test_fraction": config.sampling.test_fraction,
            "stratified": config.sampling.stratified,
        },
        "method": {"name": config.method.name, "params": dict(config.method.params)},
        "evaluation": {
            "metrics": list(config.evaluation.metrics),
            "splits": list(config.evaluation.splits),
        },
        "output": {"run_dir": config.output.run_dir, "cache_dir": config.output.cache_dir},
    }
    for key in ("path", "label_column", "features_path", "labels_path", "edges_path"):
        value = getattr(config.dataset, key)
        if value is not None:
            out["dataset"][key] = value
    if config.dataset.synthetic is not None:
        out["dataset"]["synthetic"] = {
            "name": config.dataset.synthetic.name,
            "params": dict(config.dataset.synthetic.params),
        }
    if config.sampling.labeled_per_class is not None:
        out["sampling"]["labeled_per_class"] = config.sampling.labeled_per_class
    if config.sampling.labeled_fraction is not None:
        out["sampling"]["labeled_fraction"] = config.sampling.labeled_fraction
    if config.sampling.imbalance is not None:
        out["sampling"]["imbalance"] = {
            "kind": config.sampling.imbalance.kind,
            "ratio": config.sampling.imbalance.ratio,
        }
    if config.graph is not None:
        g = config.graph
        out["graph"] = {
            "builder": g.builder,
            "k": g.k,
            "metric": g.metric,
            "weighting": g.weighting,
            "sigma": g.sigma,
            "symmetrize": g.symmetrize,
        }
        if g.eps is not None:
            out["graph"]["eps"] = g.eps
    if config.sweep is not None:
        out["sweep"] = {
            "grid": {k: list(v) for k, v in config.sweep.grid.items()},
            "select_metric": config.sweep.select_metric,
            "select_split": config.sweep.select_split,
        }
    return out


def canonicalize(config: ExperimentConfig) -> bytes:
    """Deterministic byte serialization: sorted keys, shortest float repr."""
    return json.dumps(
        to_dict(config), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def fingerprint(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical bytes, truncated to 16 hex characters."""
    return hashlib.sha256(canonicalize(config)).hexdigest()[:16]


def render(config: ExperimentConfig) -> str:
    """YAML rendering of the fully-defaulted config; re-parses to an equal config."""
    return yaml.safe_dump(to_dict(config), sort_keys=True, default_flow_style=False)
