"""End-to-end experiment orchestration: runs, sweeps, artifacts, caching.

A run directory is named by the config fingerprint and either fully exists or
not at all: failures remove partial artifacts.  Everything written except
run.log (whose timestamps are the only permitted nondeterminism) is
byte-stable across repeated runs of the same config.
"""
from __future__ import annotations

import itertools
import json
import logging
import shutil
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cfg
from . import graph as graphmod
from . import sampling
from .data import Dataset, load_dataset
from .inductive import make_strategy
from .metrics import MetricsReport, evaluate
from .rng import derive_seed
from .transductive import make_method

ROLE_OF = {name: idx for idx, name in enumerate(sampling.ROLE_NAMES)}


class RunError(Exception):
    pass


@dataclass
class RunArtifacts:
    run_dir: Path
    fingerprint: str
    report: MetricsReport
    predictions: np.ndarray
    roles: np.ndarray


def _float_repr(x: float) -> str:
    return repr(float(x))


def _graph_spec_dict(spec: cfg.GraphSpec) -> dict:
    out = {
        "builder": spec.builder,
        "k": spec.k,
        "metric": spec.metric,
        "weighting": spec.weighting,
        "sigma": spec.sigma,
        "symmetrize": spec.symmetrize,
    }
    if spec.eps is not None:
        out["eps"] = spec.eps
    return out


def _obtain_graph(
    config: cfg.ExperimentConfig, dataset: Dataset, cache_dir: Path, log: logging.Logger
) -> graphmod.SparseGraph:
    spec = config.graph
    if spec is None or spec.builder == "native":
        if dataset.native_graph is None:
            raise RunError("no graph spec and dataset has no native graph")
        log.info("using native graph (n=%d, nnz=%d)", dataset.native_graph.n,
                 dataset.native_graph.nnz)
        return dataset.native_graph
    if dataset.features is None:
        raise RunError(f"graph builder {spec.builder!r} requires features")
    key = graphmod.graph_cache_key(dataset.source_fingerprint, _graph_spec_dict(spec))
    cache_path = cache_dir / "graphs" / f"{key}.bin"
    if cache_path.exists():
        g = graphmod.load_graph(cache_path)
        log.info("graph cache hit: %s", cache_path)
        return g
    if spec.builder == "knn":
        g = graphmod.build_knn_graph(
            dataset.features, spec.k, spec.metric, spec.weighting, spec.sigma, spec.symmetrize
        )
    elif spec.builder == "epsilon":
        g = graphmod.build_epsilon_graph(
            dataset.features, spec.eps, spec.metric, spec.weighting, spec.sigma, spec.symmetrize
        )
    else:
        raise RunError(f"unknown graph builder {spec.builder!r}")
    graphmod.save_graph(g, cache_path)
    log.info("graph built and cached: %s (n=%d, nnz=%d)", cache_path, g.n, g.nnz)
    return g


def _write_splits(path: Path, roles: np.ndarray) -> None:
    lines = ["index,role"]
    lines += [f"{i},{sampling.ROLE_NAMES[r]}" for i, r in enumerate(roles)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_predictions(
    path: Path, roles: np.ndarray, labels: np.ndarray, predictions: np.ndarray,
    max_soft: np.ndarray | None,
) -> None:
    lines = ["index,role,true_label,predicted_label,max_soft"]
    for i in range(len(roles)):
        soft = _float_repr(max_soft[i]) if max_soft is not None else ""
        lines.append(
            f"{i},{sampling.ROLE_NAMES[roles[i]]},{labels[i]},{predictions[i]},{soft}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _make_logger(path: Path, level: str) -> tuple[logging.Logger, logging.Handler]:
    logger = logging.getLogger(f"semisup.run.{path.parent.name}.{id(path)}")
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    logger.propagate = False
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logger.addHandler(handler)
    return logger, handler


def run_experiment(
    config: cfg.ExperimentConfig,
    run_root: str | Path | None = None,
    cache_root: str | Path | None = None,
    log_level: str = "info",
) -> RunArtifacts:
    """Execute one experiment and persist its artifact directory."""
    issues = cfg.validate(config)
    if issues:
        raise RunError("invalid config: " + "; ".join(str(i) for i in issues))
    fingerprint = cfg.fingerprint(config)
    run_root = Path(run_root if run_root is not None else config.output.run_dir)
    cache_dir = Path(cache_root if cache_root is not None else config.output.cache_dir)
    run_dir = run_root / fingerprint
    run_dir.mkdir(parents=True, exist_ok=True)
    logger, handler = _make_logger(run_dir / "run.log", log_level)
    start = time.monotonic()
    try:
        logger.info("run %s: method=%s task=%s seed=%d",
                    fingerprint, config.method.name, config.task, config.seed)
        dataset = load_dataset(config.dataset, config.seed)
        logger.info("dataset loaded: n=%d, k=%d", dataset.n, dataset.n_classes)
        assignment = sampling.make_split(dataset, config.sampling, config.seed)
        if config.sampling.imbalance is not None:
            assignment = sampling.apply_imbalance(
                assignment, dataset, config.sampling.imbalance, config.seed
            )
        roles = assignment.roles
        logger.info("split: %s", assignment.counts())

        report_extra: dict = {}
        if config.task == "transductive":
            g = _obtain_graph(config, dataset, cache_dir, logger)
            if g.n != dataset.n:
                raise RunError("graph size does not match dataset")
            y_semi = dataset.labels.copy()
            y_semi[roles != sampling.TRAIN_LABELED] = -1
            method = make_method(config.method.name, config.method.params)
            method.fit(g, y_semi, features=dataset.features)
            predictions = method.hard_
            max_soft = method.soft_.max(axis=1)
            report_extra = {
                "iterations": method.n_iter_,
                "residual": method.residual_,
                "converged": method.converged_,
            }
            logger.info("propagation done: %d iterations, residual %.3e, converged=%s",
                        method.n_iter_, method.residual_, method.converged_)
        else:
            if dataset.features is None:
                raise RunError("inductive task requires features")
            X = dataset.features
            idx_l = assignment.indices(sampling.TRAIN_LABELED)
            idx_u = assignment.indices(sampling.TRAIN_UNLABELED)
            strategy = make_strategy(
                config.method.name, config.method.params,
                seed=derive_seed(config.seed, "strategy"),
            )
            strategy.fit(X[idx_l], dataset.labels[idx_l], X[idx_u],
                         n_classes=dataset.n_classes)
            if hasattr(strategy, "predict_proba"):
                proba = strategy.predict_proba(X)
                predictions = np.argmax(proba, axis=1)
                max_soft = proba.max(axis=1)
            else:
                predictions = strategy.predict(X)
                max_soft = None
            logger.info("strategy fitted on %d labeled / %d unlabeled",
                        len(idx_l), len(idx_u))

        report = evaluate(
            predictions, dataset.labels, roles, ROLE_OF,
            config.evaluation.metrics, config.evaluation.splits, dataset.n_classes,
        )
        report.fingerprint = fingerprint
        report.method = config.method.name
        for key, value in report_extra.items():
            setattr(report, key, value)

        (run_dir / "config.yaml").write_text(cfg.render(config), encoding="utf-8")
        _write_splits(run_dir / "splits.csv", roles)
        _write_predictions(run_dir / "predictions.csv", roles, dataset.labels,
                           predictions, max_soft)
        (run_dir / "metrics.json").write_text(report.to_json(), encoding="utf-8")
        logger.info("metrics: %s", report.splits)
        logger.info("finished in %.2fs", time.monotonic() - start)
    except Exception:
        logger.removeHandler(handler)
        handler.close()
        shutil.rmtree(run_dir, ignore_errors=True)
        raise
    logger.removeHandler(handler)
    handler.close()
    return RunArtifacts(
        run_dir=run_dir,
        fingerprint=fingerprint,
        report=report,
        predictions=predictions,
        roles=roles,
    )


# ---------------------------------------------------------------------------
# grid sweep

MAX_GRID = 10000


@dataclass
class SweepResult:
    sweep_dir: Path
    best: RunArtifacts
    best_params: dict
    table: list[dict]


def _coerce_like(default, value):
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def grid_sweep(
    config: cfg.ExperimentConfig,
    run_root: str | Path | None = None,
    cache_root: str | Path | None = None,
    log_level: str = "info",
) -> SweepResult:
    """Exhaustive Cartesian grid over method params; best trial by the
    configured metric, ties broken by the earliest tuple in declaration order."""
    if config.sweep is None:
        raise RunError("config has no sweep block")
    issues = cfg.validate(config)
    if issues:
        raise RunError("invalid config: " + "; ".join(str(i) for i in issues))
    grid = config.sweep.grid
    names = list(grid.keys())
    combos = list(itertools.product(*(grid[name] for name in names)))
    if len(combos) > MAX_GRID:
        raise RunError(f"grid size {len(combos)} exceeds limit {MAX_GRID}")

    run_root = Path(run_root if run_root is not None else config.output.run_dir)
    sweep_fp = cfg.fingerprint(config)
    sweep_dir = run_root / sweep_fp
    trials_dir = sweep_dir / "trials"
    trials_dir.mkdir(parents=True, exist_ok=True)

    select_metric = config.sweep.select_metric
    select_split = config.sweep.select_split
    table: list[dict] = []
    best_idx = -1
    best_score = -np.inf
    best_art: RunArtifacts | None = None
    try:
        for trial_no, combo in enumerate(combos):
            trial = cfg.parse_config(cfg.render(config))
            trial.sweep = None
            for name, value in zip(names, combo):
                trial.method.params[name] = _coerce_like(
                    trial.method.params.get(name), value
                )
            art = run_experiment(trial, run_root=trials_dir, cache_root=cache_root,
                                 log_level=log_level)
            score = art.report.splits[select_split][select_metric]
            table.append(
                {
                    "trial": art.fingerprint,
                    **{name: value for name, value in zip(names, combo)},
                    select_metric: score,
                }
            )
            if score > best_score:
                best_score = score
                best_idx = trial_no
                best_art = art

        header = ["trial", *names, select_metric]
        lines = [",".join(header)]
        for row in table:
            cells = [str(row["trial"])]
            cells += [
                _float_repr(row[n]) if isinstance(row[n], float) else str(row[n])
                for n in names
            ]
            cells.append(_float_repr(row[select_metric]))
            lines.append(",".join(cells))
        (sweep_dir / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        best_params = {name: combos[best_idx][i] for i, name in enumerate(names)}
        best_doc = {
            "fingerprint": best_art.fingerprint,
            "params": best_params,
            "select_metric": select_metric,
            "select_split": select_split,
            "score": best_score,
        }
        (sweep_dir / "best_trial.json").write_text(
            json.dumps(best_doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    except Exception:
        shutil.rmtree(sweep_dir, ignore_errors=True)
        raise
    return SweepResult(
        sweep_dir=sweep_dir, best=best_art, best_params=best_params, table=table
    )
