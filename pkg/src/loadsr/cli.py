"""Command-line front end.

Subcommands:
  generate   write a synthetic fault/recovery dataset (CSV + JSON sidecar)
  fit        run the expression search on a CSV and write a run manifest
  eval       score a rendered expression string against a CSV
  benchmark  run the task suite (policy sweep, depth sweep, baselines)

Configuration comes from flat ``key = value`` files ('#' starts a
comment); command-line flags override file values. Exit codes: 0 ok,
2 configuration error (including expression parse errors), 3 data
error, 4 search failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import fit_polynomial, fit_zip
from .benchmark import REPORT_KINDS, SuiteConfig, run_suite
from .data import TrajectoryConfig, add_lags, gen_erl, gen_zip, load_csv, split, standardize
from .errors import (ConfigError, DataError, ExpressionParseError, SearchError)
from .metrics import mae, rmse
from .parsing import parse_expression
from .search import SearchConfig, run_search
from .tasks import TASK_NAMES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SEARCH = 4


def _to_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _to_str_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _to_int_list(raw: str) -> list[int]:
    return [int(item) for item in _to_str_list(raw)]


SEARCH_SCHEMA = {
    "depth": int, "risk_fraction": float, "policy": str,
    "search_iterations": int, "critic_iterations": int,
    "finetune_iterations": int, "batch_size": int, "pool_size": int,
    "actor_lr": float, "critic_lr": float, "entropy_coef": float,
    "seed": int, "unary_ops": _to_str_list, "binary_ops": _to_str_list,
    "guard_epsilon": float, "clip_norm": float,
    "per_sample_update": _to_bool, "reuse_critic_cache": _to_bool,
    "batched_critic": _to_bool,
}
DATA_SCHEMA = {
    "features": _to_str_list, "target": str, "time_column": str,
    "lags": _to_int_list, "train_fraction": float, "split_mode": str,
    "split_seed": int, "normalize": _to_bool,
}
TRAJECTORY_SCHEMA = {
    "kind": str, "duration": float, "dt": float, "fault_time": float,
    "dip": float, "recovery_tau": float, "noise_sigma": float, "p0": float,
    "a_z": float, "a_i": float, "a_p": float,
    "alpha_s": float, "alpha_t": float, "t_p": float, "seed": int,
}
SUITE_SCHEMA = {
    "tasks": _to_str_list, "seeds": _to_int_list, "seed_count": int,
    "reports": _to_str_list, "workers": int,
}


def read_config_file(path) -> dict[str, str]:
    """Flat key = value lines; '#' comments; blank lines ignored."""
    raw = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def coerce_config(raw: dict, schemas: list[dict], where: str) -> dict:
    merged_schema = {}
    for schema in schemas:
        merged_schema.update(schema)
    out = {}
    for key, value in raw.items():
        if key not in merged_schema:
            known = ", ".join(sorted(merged_schema))
            raise ConfigError(f"{where}: unknown key {key!r} (known keys: {known})")
        try:
            out[key] = merged_schema[key](value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    return out


def _search_config(values: dict) -> SearchConfig:
    kwargs = {}
    for key in SEARCH_SCHEMA:
        if key not in values or values[key] is None:
            continue
        if key == "policy":
            kwargs["policy_mode"] = values[key]
        elif key in ("unary_ops", "binary_ops"):
            kwargs[key] = tuple(values[key])
        else:
            kwargs[key] = values[key]
    return SearchConfig(**kwargs)


def _fingerprint(path) -> dict:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return {"path": str(path), "sha256": digest}


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_generate(args) -> int:
    values = {}
    if args.config:
        values = coerce_config(read_config_file(args.config),
                               [TRAJECTORY_SCHEMA], args.config)
    seed = args.seed if args.seed is not None else values.pop("seed", 0)
    config = TrajectoryConfig(**values)
    config.validate()

    rng = np.random.default_rng(seed)
    ds = gen_zip(config, rng) if config.kind == "zip" else gen_erl(config, rng)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["t", "V", "P"],
               [(repr(float(t)), repr(float(v)), repr(float(p)))
                for t, v, p in zip(ds.time, ds.X[:, 0], ds.y)])
    sidecar = {
        "generator": {k: getattr(config, k) for k in TRAJECTORY_SCHEMA if k != "seed"},
        "seed": seed,
        "rows": ds.n,
        "columns": ["t", "V", "P"],
    }
    out.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True),
                                        encoding="utf-8")
    print(f"wrote {ds.n} rows to {out}")
    return EXIT_OK


def _prepare_dataset(args, values):
    features = values.get("features", ["V"])
    target = values.get("target", "P")
    time_column = values.get("time_column", "t")
    ds = load_csv(args.data, features, target, time_column=time_column)
    lags = values.get("lags", [])
    if lags:
        ds = add_lags(ds, lags)
    if values.get("normalize", False):
        ds = standardize(ds)
    return ds


def cmd_fit(args) -> int:
    raw = read_config_file(args.config) if args.config else {}
    values = coerce_config(raw, [SEARCH_SCHEMA, DATA_SCHEMA],
                           args.config or "<flags>")
    if args.policy:
        values["policy"] = args.policy
    if args.seed is not None:
        values["seed"] = args.seed
    if args.features:
        values["features"] = _to_str_list(args.features)
    if args.target:
        values["target"] = args.target
    if args.lags:
        values["lags"] = _to_int_list(args.lags)

    config = _search_config(values)
    config.validate()
    ds = _prepare_dataset(args, values)
    train, test = split(ds, values.get("train_fraction", 0.8),
                        mode=values.get("split_mode", "chronological"),
                        seed=values.get("split_seed", 0))

    started = time.perf_counter()
    result = run_search(config, train, test)
    total = time.perf_counter() - started

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    parsed = parse_expression(result.expression)
    predictions = parsed.evaluate(ds.X)
    t_col = ds.time if ds.time is not None else np.arange(ds.n, dtype=float)
    _write_csv(out_dir / "predictions.csv", ["t", "y_true", "y_pred"],
               [(repr(float(t)), repr(float(a)), repr(float(b)))
                for t, a, b in zip(t_col, ds.y, predictions)])

    baselines = {}
    if ds.d == 1:
        try:
            fit = fit_zip(train)
            baselines["zip"] = {"parameters": fit.parameters,
                                "train_rmse": fit.train_rmse,
                                "test_rmse": fit.score(test)}
        except Exception as exc:
            baselines["zip"] = {"error": f"{type(exc).__name__}: {exc}"}
    for degree in (2, 3):
        try:
            fit = fit_polynomial(train, degree)
            baselines[f"poly_deg{degree}"] = {"train_rmse": fit.train_rmse,
                                              "test_rmse": fit.score(test)}
        except Exception as exc:
            baselines[f"poly_deg{degree}"] = {"error": f"{type(exc).__name__}: {exc}"}

    result_echo = result.to_dict()
    search_seconds = result_echo.pop("wall_time")
    library = {"unary": list(config.unary_ops), "binary": list(config.binary_ops),
               "variables": ds.d, "guard_epsilon": config.guard_epsilon}
    manifest = {
        "config": {**config.to_dict(),
                   "features": ds.columns, "target": ds.target,
                   "train_fraction": values.get("train_fraction", 0.8),
                   "split_mode": values.get("split_mode", "chronological"),
                   "split_seed": values.get("split_seed", 0),
                   "lags": values.get("lags", []),
                   "normalize": values.get("normalize", False)},
        "dataset": {**_fingerprint(args.data), "rows": ds.n, "cols": ds.d,
                    "dropped_rows": ds.dropped_rows,
                    "train_rows": train.n, "test_rows": test.n},
        "library": library,
        "result": result_echo,
        "baselines": baselines,
        "timings": {"search_seconds": search_seconds, "total_seconds": total},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    (out_dir / "expression.txt").write_text(result.expression + "\n",
                                            encoding="utf-8")
    print(f"expression: {result.expression}")
    print(f"train rmse: {result.train_rmse:.6g}   test rmse: {result.test_rmse:.6g}")
    print(f"outputs in {out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.expr_file:
        expression = Path(args.expr_file).read_text(encoding="utf-8").strip()
    else:
        expression = args.expr
    if not expression:
        raise ConfigError("no expression given (use --expr or --expr-file)")
    parsed = parse_expression(expression)

    values = {}
    if args.features:
        values["features"] = _to_str_list(args.features)
    if args.target:
        values["target"] = args.target
    if args.lags:
        values["lags"] = _to_int_list(args.lags)
    ds = _prepare_dataset(args, values)
    predictions = parsed.evaluate(ds.X)
    metrics = {"rmse": rmse(ds.y, predictions), "mae": mae(ds.y, predictions),
               "rows": ds.n}
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    raw = read_config_file(args.suite) if args.suite else {}
    values = coerce_config(raw, [SUITE_SCHEMA, SEARCH_SCHEMA],
                           args.suite or "<flags>")
    tasks = tuple(values.pop("tasks", TASK_NAMES))
    seeds = values.pop("seeds", None)
    if seeds is None:
        seeds = tuple(range(values.pop("seed_count", 3)))
    else:
        values.pop("seed_count", None)
        seeds = tuple(seeds)
    reports = tuple(values.pop("reports", REPORT_KINDS))
    workers = values.pop("workers", 1)
    if args.workers is not None:
        workers = args.workers
    overrides = {("policy_mode" if k == "policy" else k): v
                 for k, v in values.items()}
    if "unary_ops" in overrides:
        overrides["unary_ops"] = tuple(overrides["unary_ops"])
    if "binary_ops" in overrides:
        overrides["binary_ops"] = tuple(overrides["binary_ops"])

    suite = SuiteConfig(tasks=tasks, seeds=seeds, reports=reports,
                        workers=workers, overrides=overrides)
    report = run_suite(suite)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = report.to_rows()
    _write_csv(out_dir / "cells.csv", list(rows[0].keys()),
               [list(r.values()) for r in rows])
    text = report.render_text()
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    summary = {
        "tasks": list(tasks), "seeds": list(seeds), "reports": list(reports),
        "aggregates": {
            task: {setting: report.aggregate(task, setting)
                   for setting in {c.setting for c in report.cells}}
            for task in tasks},
        "baselines": report.baselines,
        "wall_time": report.wall_time,
    }
    (out_dir / "report.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    print(text)
    print(f"outputs in {out_dir}")
    failures = [c for c in report.cells if c.error]
    if failures:
        print(f"warning: {len(failures)} cells failed; see cells.csv", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadsr",
        description="symbolic regression for dynamic load modeling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--config", help="trajectory config file (key = value)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, default=None, help="overrides config seed")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("fit", help="search for an expression on a CSV")
    p.add_argument("--data", required=True, help="input CSV")
    p.add_argument("--config", help="search/data config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--policy", choices=["risk_seeking", "standard"],
                   help="overrides the config's policy mode")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--features", help="comma-separated feature columns (default V)")
    p.add_argument("--target", help="target column (default P)")
    p.add_argument("--lags", help="comma-separated lag steps")
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("eval", help="score an expression against a CSV")
    p.add_argument("--expr", help="expression string")
    p.add_argument("--expr-file", help="file holding the expression")
    p.add_argument("--data", required=True, help="input CSV")
    p.add_argument("--features", help="comma-separated feature columns (default V)")
    p.add_argument("--target", help="target column (default P)")
    p.add_argument("--lags", help="comma-separated lag steps")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("benchmark", help="run the benchmark suite")
    p.add_argument("--suite", help="suite config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ExpressionParseError as exc:
        print(f"expression error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SearchError as exc:
        print(f"search error: {exc}", file=sys.stderr)
        return EXIT_SEARCH


if __name__ == "__main__":
    sys.exit(main())
