"""Synthetic benchmark tasks.

Five fixed regression problems spanning the shapes that matter for load
modeling: a static quadratic load on a fault trajectory, three smooth
function-recovery targets (periodic, exponential-recovery, saturating),
and a noisy dynamic recovery load where the engine gets lagged voltage
features while the static baselines see the raw univariate trace.

Task data is deterministic (fixed generator seeds); benchmark seeds vary
only the search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, TrajectoryConfig, add_lags, gen_erl, gen_zip, split
from .errors import ConfigError


@dataclass
class TaskData:
    name: str
    description: str
    train: Dataset
    test: Dataset
    baseline_train: Dataset
    baseline_test: Dataset


def _function_task(name, description, fn, lo, hi, n=250, data_seed=7):
    x = np.sort(np.random.default_rng(data_seed).uniform(lo, hi, size=n))
    ds = Dataset(X=x.reshape(-1, 1), y=fn(x), columns=["x"])
    train, test = split(ds, 0.8, mode="shuffled", seed=0)
    return TaskData(name, description, train, test, train, test)


def _zip_fault_task():
    cfg = TrajectoryConfig(kind="zip", duration=12.0, dt=0.06, fault_time=1.0,
                           dip=0.7, recovery_tau=4.0, noise_sigma=0.0,
                           a_z=0.4, a_i=0.3, a_p=0.3)
    ds = gen_zip(cfg, rng=11)
    train, test = split(ds, 0.8, mode="shuffled", seed=0)
    return TaskData("zip_fault", "static ZIP load on a fault/recovery trace (noise-free)",
                    train, test, train, test)


def _erl_noisy_task():
    cfg = TrajectoryConfig(kind="erl", duration=12.0, dt=0.06, fault_time=1.0,
                           dip=0.5, recovery_tau=2.0, noise_sigma=0.01,
                           p0=1.0, alpha_s=0.38, alpha_t=2.26, t_p=1.5)
    ds = gen_erl(cfg, rng=13)
    lagged = add_lags(ds, [1, 2])
    # align the unlagged baseline data with the rows the lags kept
    base = ds.take(np.arange(2, ds.n))
    train, test = split(lagged, 0.8, mode="shuffled", seed=0)
    base_train, base_test = split(base, 0.8, mode="shuffled", seed=0)
    return TaskData("erl_noisy",
                    "exponential-recovery load, 1% noise; engine sees lagged voltage",
                    train, test, base_train, base_test)


_BUILDERS = {
    "zip_fault": _zip_fault_task,
    "sin_wave": lambda: _function_task(
        "sin_wave", "y = sin(1.3 x) + 0.5 on [-2, 2]",
        lambda x: np.sin(1.3 * x) + 0.5, -2.0, 2.0, data_seed=7),
    # three independent nonlinear terms: out of reach for a depth-3 tree,
    # which joins at most two unary transforms
    "composite_recovery": lambda: _function_task(
        "composite_recovery",
        "y = 1 - 0.45 exp(-1.1 x) + 0.18 sin(2.2 x) + 0.25 tanh(1.5 (x - 1)) on [0, 4]",
        lambda x: (1.0 - 0.45 * np.exp(-1.1 * x) + 0.18 * np.sin(2.2 * x)
                   + 0.25 * np.tanh(1.5 * (x - 1.0))), 0.0, 4.0, data_seed=8),
    # a decaying oscillation times-product plus a ramp: needs a product
    # joint and a separate additive trend
    "damped_oscillation": lambda: _function_task(
        "damped_oscillation",
        "y = exp(-0.8 x) sin(2.5 x) + 0.4 x on [0, 4]",
        lambda x: np.exp(-0.8 * x) * np.sin(2.5 * x) + 0.4 * x,
        0.0, 4.0, data_seed=9),
    "erl_noisy": _erl_noisy_task,
}

TASK_NAMES = tuple(_BUILDERS)


def make_task(name: str) -> TaskData:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ConfigError(f"unknown task {name!r}; available: {', '.join(TASK_NAMES)}") from None
    return builder()
