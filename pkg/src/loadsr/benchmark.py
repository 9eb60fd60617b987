"""Benchmark suite runner: policy sweep, depth sweep, baseline comparison.

Executes a grid of (task, setting, seed) search runs plus baseline fits
and aggregates per-task median / IQR test RMSE tables. Cells are
independent, so they parallelize across processes; results are reduced
in fixed grid order, keeping reports deterministic for a given suite
config regardless of worker count. Individual cell failures are
recorded and the suite continues.
"""

from __future__ import annotations

import io
import multiprocessing
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import fit_polynomial, fit_zip
from .errors import ConfigError
from .search import SearchConfig, run_search
from .tasks import TASK_NAMES, make_task

REPORT_KINDS = ("policy", "depth", "models")

# Table layouts: risk fractions swept at the default depth; depths swept
# at the default risk fraction
POLICY_SETTINGS = (
    ("risk_0.3", {"policy_mode": "risk_seeking", "risk_fraction": 0.3, "depth": 5}),
    ("risk_0.5", {"policy_mode": "risk_seeking", "risk_fraction": 0.5, "depth": 5}),
    ("risk_0.7", {"policy_mode": "risk_seeking", "risk_fraction": 0.7, "depth": 5}),
    ("standard", {"policy_mode": "standard", "risk_fraction": 0.5, "depth": 5}),
)
DEPTH_SETTINGS = (
    ("depth_3", {"policy_mode": "risk_seeking", "risk_fraction": 0.5, "depth": 3}),
    ("depth_5", {"policy_mode": "risk_seeking", "risk_fraction": 0.5, "depth": 5}),
    ("depth_7", {"policy_mode": "risk_seeking", "risk_fraction": 0.5, "depth": 7}),
)
BASELINE_NAMES = ("zip", "poly_deg2", "poly_deg3")


@dataclass
class SuiteConfig:
    tasks: tuple = TASK_NAMES
    seeds: tuple = tuple(range(10))
    reports: tuple = REPORT_KINDS
    workers: int = 1
    overrides: dict = field(default_factory=dict)  # SearchConfig fields

    def validate(self):
        for name in self.tasks:
            if name not in TASK_NAMES:
                raise ConfigError(f"unknown task {name!r}")
        for rep in self.reports:
            if rep not in REPORT_KINDS:
                raise ConfigError(f"unknown report {rep!r}; known: {REPORT_KINDS}")
        if not self.seeds:
            raise ConfigError("suite needs at least one seed")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        probe = SearchConfig(**self.overrides)
        probe.validate()


@dataclass
class Cell:
    task: str
    setting: str
    seed: int
    train_rmse: float | None = None
    test_rmse: float | None = None
    expression: str | None = None
    wall_time: float = 0.0
    error: str | None = None


def _settings_for(reports) -> list[tuple[str, dict]]:
    chosen: dict[str, dict] = {}
    if "policy" in reports:
        chosen.update(dict(POLICY_SETTINGS))
    if "depth" in reports:
        chosen.update(dict(DEPTH_SETTINGS))
    if "models" in reports:
        # the comparison column is the default engine setting; its runs are
        # shared with risk_0.5 / depth_5 by the dedup key
        chosen.setdefault("risk_0.5", dict(POLICY_SETTINGS)["risk_0.5"])
    return sorted(chosen.items())


def _dedupe_key(params: dict, seed: int, task: str) -> tuple:
    return (task, params["policy_mode"], params["risk_fraction"],
            params["depth"], seed)


def _run_cell(args) -> Cell:
    task_name, setting_name, params, seed, overrides = args
    cell = Cell(task=task_name, setting=setting_name, seed=seed)
    started = time.perf_counter()
    try:
        data = make_task(task_name)
        config = SearchConfig(seed=seed, **{**overrides, **params})
        result = run_search(config, data.train, data.test)
        cell.train_rmse = result.train_rmse
        cell.test_rmse = result.test_rmse
        cell.expression = result.expression
    except Exception as exc:  # record and continue; the suite must not die
        cell.error = f"{type(exc).__name__}: {exc}"
    cell.wall_time = time.perf_counter() - started
    return cell


def _fit_baselines(task_name: str) -> dict:
    data = make_task(task_name)
    out = {}
    for name in BASELINE_NAMES:
        try:
            if name == "zip":
                fit = fit_zip(data.baseline_train)
            else:
                fit = fit_polynomial(data.baseline_train, int(name[-1]))
            out[name] = {"test_rmse": fit.score(data.baseline_test),
                         "train_rmse": fit.train_rmse,
                         "parameters": fit.parameters}
        except Exception as exc:
            out[name] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


@dataclass
class SuiteReport:
    config: SuiteConfig
    cells: list
    baselines: dict
    wall_time: float

    def cell_map(self) -> dict:
        return {(c.task, c.setting, c.seed): c for c in self.cells}

    def aggregate(self, task: str, setting: str) -> dict | None:
        values = [c.test_rmse for c in self.cells
                  if c.task == task and c.setting == setting and c.error is None
                  and c.test_rmse is not None]
        if not values:
            return None
        arr = np.asarray(sorted(values))
        return {
            "median": float(np.median(arr)),
            "q1": float(np.percentile(arr, 25)),
            "q3": float(np.percentile(arr, 75)),
            "count": len(values),
        }

    def to_rows(self) -> list[dict]:
        rows = []
        for c in self.cells:
            rows.append({"task": c.task, "setting": c.setting, "seed": c.seed,
                         "train_rmse": c.train_rmse, "test_rmse": c.test_rmse,
                         "wall_time": round(c.wall_time, 3),
                         "status": c.error or "ok"})
        return rows

    def _table(self, title: str, columns: list[str],
               value_fn) -> str:
        out = io.StringIO()
        out.write(f"{title}\n")
        width = max(len(t) for t in self.config.tasks) + 2
        out.write(" " * width + "".join(f"{c:>16}" for c in columns) + "\n")
        for task in self.config.tasks:
            out.write(f"{task:<{width}}")
            for col in columns:
                value = value_fn(task, col)
                out.write(f"{value:>16}")
            out.write("\n")
        return out.getvalue()

    def _formatted(self, task, setting):
        agg = self.aggregate(task, setting)
        if agg is None:
            return "--"
        return f"{agg['median']:.4f} ({agg['q3'] - agg['q1']:.4f})"

    def render_text(self) -> str:
        parts = ["benchmark report: per-task median test RMSE (IQR) over "
                 f"{len(self.config.seeds)} seeds\n"]
        if "policy" in self.config.reports:
            parts.append(self._table(
                "policy sweep (depth 5)",
                [name for name, _ in POLICY_SETTINGS],
                self._formatted))
        if "depth" in self.config.reports:
            parts.append(self._table(
                "depth sweep (risk fraction 0.5)",
                [name for name, _ in DEPTH_SETTINGS],
                self._formatted))
        if "models" in self.config.reports:
            def model_value(task, col):
                if col == "engine":
                    return self._formatted(task, "risk_0.5")
                info = self.baselines.get(task, {}).get(col, {})
                if "test_rmse" in info:
                    return f"{info['test_rmse']:.4f}"
                return "--"
            parts.append(self._table(
                "model comparison (engine at depth 5, risk 0.5)",
                ["engine", *BASELINE_NAMES], model_value))
        return "\n".join(parts)


def run_suite(config: SuiteConfig) -> SuiteReport:
    config.validate()
    settings = _settings_for(config.reports)

    jobs = []
    seen = set()
    for task in config.tasks:
        for setting_name, params in settings:
            for seed in config.seeds:
                key = _dedupe_key(params, seed, task)
                if key in seen:
                    continue
                seen.add(key)
                jobs.append((task, setting_name, params, seed, config.overrides))

    started = time.perf_counter()
    if config.workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(config.workers) as pool:
            computed = pool.map(_run_cell, jobs)
    else:
        computed = [_run_cell(job) for job in jobs]

    # settings that alias the same runs (risk_0.5 == depth_5) share results
    by_key = {}
    for job, cell in zip(jobs, computed):
        by_key[_dedupe_key(job[2], job[3], job[0])] = cell
    cells = []
    for task in config.tasks:
        for setting_name, params in settings:
            for seed in config.seeds:
                base = by_key[_dedupe_key(params, seed, task)]
                cells.append(replace(base, setting=setting_name, seed=seed, task=task))

    baselines = {}
    if "models" in config.reports:
        for task in config.tasks:
            baselines[task] = _fit_baselines(task)

    return SuiteReport(config=config, cells=cells, baselines=baselines,
                       wall_time=time.perf_counter() - started)
