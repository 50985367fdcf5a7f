"""Command-line interface: validate / run / sweep / cache subcommands."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as cfg
from .runner import grid_sweep, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semisup",
        description="Config-driven semi-supervised classification experiments",
    )
    parser.add_argument("--out-dir", default=None, help="override output.run_dir")
    parser.add_argument("--cache-dir", default=None, help="override output.cache_dir")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument(
        "--threads", type=int, default=1,
        help="parallelism hint; results are identical for any value",
    )
    parser.add_argument(
        "--log-level", choices=["error", "warn", "info", "debug"], default="info"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("validate", "parse and validate a config; exit 0 iff valid"),
        ("run", "run one experiment"),
        ("sweep", "run a hyperparameter grid sweep"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the YAML config")
    p_cache = sub.add_parser("cache", help="inspect or clear the graph cache")
    p_cache.add_argument("action", choices=["ls", "gc"])
    p_cache.add_argument("dir", help="cache directory")
    return parser


def _load_config(path: str, args) -> cfg.ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    config = cfg.parse_config(text)
    if args.seed is not None:
        config.seed = args.seed
    return config


def _cmd_validate(args) -> int:
    try:
        config = _load_config(args.config, args)
    except (OSError, cfg.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    issues = cfg.validate(config)
    if issues:
        for issue in issues:
            print(f"error: {issue}", file=sys.stderr)
        return 1
    print(f"ok: {cfg.fingerprint(config)}")
    return 0


def _cmd_run(args) -> int:
    try:
        config = _load_config(args.config, args)
        artifacts = run_experiment(
            config, run_root=args.out_dir, cache_root=args.cache_dir,
            log_level="warning" if args.log_level == "warn" else args.log_level,
        )
    except Exception as exc:  # pipeline errors surface as messages, not tracebacks
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"run {artifacts.fingerprint}: {artifacts.run_dir}")
    for split, scores in artifacts.report.splits.items():
        for metric, value in scores.items():
            print(f"  {split}.{metric} = {value:.6f}")
    return 0


def _cmd_sweep(args) -> int:
    try:
        config = _load_config(args.config, args)
        result = grid_sweep(
            config, run_root=args.out_dir, cache_root=args.cache_dir,
            log_level="warning" if args.log_level == "warn" else args.log_level,
        )
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"sweep {result.sweep_dir.name}: {len(result.table)} trials")
    print(f"best: {result.best.fingerprint} params={result.best_params}")
    return 0


def _cmd_cache(args) -> int:
    graphs = Path(args.dir) / "graphs"
    files = sorted(graphs.glob("*.bin")) if graphs.is_dir() else []
    if args.action == "ls":
        for f in files:
            print(f"{f.stem}  {f.stat().st_size} bytes")
        print(f"{len(files)} cached graphs")
        return 0
    for f in files:
        f.unlink()
    print(f"removed {len(files)} cached graphs")
    return 0


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on unknown flags/subcommands, 0 on --help
        return int(exc.code or 0)
    if args.command == "validate":
        return _cmd_validate(args)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "sweep":
        return _cmd_sweep(args)
    return _cmd_cache(args)


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
