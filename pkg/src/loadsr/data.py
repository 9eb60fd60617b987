"""Dataset ingestion, lag features, splits, and synthetic load generators.

The generators produce fault-and-recovery voltage trajectories and the
corresponding power response of two classic load models: the static ZIP
model and a first-order exponential-recovery load (ERL). They stand in
for proprietary grid simulation output at desk scale; every generator
is deterministic given its seed and, at zero noise, matches the closed
form / ODE it discretizes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError

VOLTAGE_CLIP = (0.01, 1.5)


@dataclass
class Dataset:
    """Feature matrix, target vector, and provenance metadata."""

    X: np.ndarray
    y: np.ndarray
    columns: list[str]
    target: str = "y"
    dt: float | None = None
    time: np.ndarray | None = None
    normalization: dict[str, tuple[float, float]] | None = None
    lag_spec: dict | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}")
        if self.X.shape[0] < 1:
            raise DataError("dataset needs at least one sample")
        if self.X.shape[1] != len(self.columns):
            raise DataError(f"{self.X.shape[1]} feature columns but "
                            f"{len(self.columns)} column names")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise DataError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return replace(self, X=self.X[indices], y=self.y[indices],
                       time=None if self.time is None else self.time[indices])


@dataclass
class TrajectoryConfig:
    """Knobs for the synthetic fault/recovery generators."""

    kind: str = "zip"  # "zip" or "erl"
    duration: float = 10.0
    dt: float = 0.01
    fault_time: float = 3.5
    dip: float = 0.3
    recovery_tau: float = 1.5
    noise_sigma: float = 0.0
    p0: float = 1.0
    # ZIP shares (constant impedance / current / power); must sum to 1
    a_z: float = 0.4
    a_i: float = 0.3
    a_p: float = 0.3
    # ERL exponents (steady-state / transient) and recovery time constant
    alpha_s: float = 0.38
    alpha_t: float = 2.26
    t_p: float = 1.5

    def validate(self):
        if self.duration <= 0 or self.dt <= 0:
            raise ConfigError("duration and dt must be positive")
        if not 0.0 < self.dip < 1.0:
            raise ConfigError(f"voltage dip must be in (0, 1), got {self.dip}")
        if self.recovery_tau <= 0:
            raise ConfigError("recovery_tau must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.kind not in ("zip", "erl"):
            raise ConfigError(f"unknown generator kind {self.kind!r}")
        if self.kind == "zip":
            total = self.a_z + self.a_i + self.a_p
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(
                    f"ZIP shares a_z + a_i + a_p must sum to 1, got {total}")
        if self.kind == "erl":
            if self.t_p <= 0:
                raise ConfigError("t_p must be positive")
            if self.dt >= self.t_p / 10.0:
                raise ConfigError(
                    f"dt={self.dt} too large for explicit integration; need dt < t_p/10 = {self.t_p / 10.0}")


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(0 if rng is None else rng)


def gen_voltage(config: TrajectoryConfig, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit voltage: flat at 1, step dip at the fault, exponential recovery."""
    config.validate()
    rng = _as_rng(rng)
    n = int(round(config.duration / config.dt))
    if n < 1:
        raise ConfigError("duration/dt yields an empty trajectory")
    t = np.arange(n) * config.dt
    v = np.ones(n)
    after = t >= config.fault_time
    v[after] = 1.0 - config.dip * np.exp(-(t[after] - config.fault_time) / config.recovery_tau)
    if config.noise_sigma > 0:
        v = v + config.noise_sigma * rng.standard_normal(n)
    return t, np.clip(v, *VOLTAGE_CLIP)


def gen_zip(config: TrajectoryConfig, rng=None) -> Dataset:
    """Static ZIP response P = p0 * (a_z V^2 + a_i V + a_p) on a fault trajectory."""
    if config.kind != "zip":
        config = replace(config, kind="zip")
    config.validate()
    rng = _as_rng(rng)
    t, v = gen_voltage(config, rng)
    p = config.p0 * (config.a_z * v**2 + config.a_i * v + config.a_p)
    if config.noise_sigma > 0:
        p = p + config.noise_sigma * rng.standard_normal(v.size)
    return Dataset(X=v.reshape(-1, 1), y=p, columns=["V"], target="P",
                   dt=config.dt, time=t)


def gen_erl(config: TrajectoryConfig, rng=None) -> Dataset:
    """Exponential-recovery load, forward-Euler discretized.

    State equation: x' = -x/t_p + p0 * (V^alpha_s - V^alpha_t), x(0) = 0,
    with output P = x/t_p + p0 * V^alpha_t. At constant V the power
    settles at p0 * V^alpha_s.
    """
    if config.kind != "erl":
        config = replace(config, kind="erl")
    config.validate()
    rng = _as_rng(rng)
    t, v = gen_voltage(config, rng)
    vs = config.p0 * v**config.alpha_s
    vt = config.p0 * v**config.alpha_t
    x = np.empty(v.size)
    x[0] = 0.0
    decay = 1.0 - config.dt / config.t_p
    for k in range(v.size - 1):
        x[k + 1] = decay * x[k] + config.dt * (vs[k] - vt[k])
    p = x / config.t_p + vt
    if config.noise_sigma > 0:
        p = p + config.noise_sigma * rng.standard_normal(v.size)
    return Dataset(X=v.reshape(-1, 1), y=p, columns=["V"], target="P",
                   dt=config.dt, time=t)


def load_csv(path, feature_columns, target_column: str,
             time_column: str = "t") -> Dataset:
    """Read a header-first CSV; rows with non-finite selected values are dropped."""
    feature_columns = list(feature_columns)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: file is empty") from None
            header = [h.strip() for h in header]
            rows = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None

    for name in feature_columns + [target_column]:
        if name not in header:
            raise DataError(f"{path}: column {name!r} not found (header: {header})")

    col_idx = {name: header.index(name) for name in header}
    want = feature_columns + [target_column]
    has_time = time_column in header and time_column not in want

    parsed, times, dropped = [], [], 0
    for row in rows:
        try:
            values = [float(row[col_idx[name]]) for name in want]
        except (ValueError, IndexError):
            dropped += 1
            continue
        if not all(math.isfinite(v) for v in values):
            dropped += 1
            continue
        parsed.append(values)
        if has_time:
            try:
                times.append(float(row[col_idx[time_column]]))
            except (ValueError, IndexError):
                times.append(math.nan)
    if not parsed:
        raise DataError(f"{path}: no valid rows after dropping {dropped} bad rows")

    arr = np.asarray(parsed, dtype=float)
    time = np.asarray(times) if has_time and np.all(np.isfinite(times)) else None
    return Dataset(X=arr[:, :-1], y=arr[:, -1], columns=feature_columns,
                   target=target_column, time=time, dropped_rows=dropped)


def add_lags(ds: Dataset, lags, columns=None) -> Dataset:
    """Append shifted copies of selected feature columns as extra features.

    ``col_lagK[i] = col[i - K]``; the first max-lag rows are dropped so
    every lagged value is real data.
    """
    lags = [int(k) for k in lags]
    if not lags:
        return replace(ds)
    if any(k < 1 for k in lags):
        raise ConfigError(f"lags must be positive integers, got {lags}")
    if max(lags) >= ds.n:
        raise ConfigError(f"max lag {max(lags)} must be smaller than n={ds.n}")
    if columns is None:
        columns = list(ds.columns)
    for name in columns:
        if name not in ds.columns:
            raise DataError(f"unknown lag target column {name!r}")

    cut = max(lags)
    blocks = [ds.X[cut:]]
    names = list(ds.columns)
    for name in columns:
        j = ds.columns.index(name)
        for k in lags:
            blocks.append(ds.X[cut - k:ds.n - k, j].reshape(-1, 1))
            names.append(f"{name}_lag{k}")
    return replace(ds,
                   X=np.hstack(blocks),
                   y=ds.y[cut:],
                   columns=names,
                   time=None if ds.time is None else ds.time[cut:],
                   lag_spec={"lags": lags, "columns": list(columns)})


def standardize(ds: Dataset) -> Dataset:
    """Per-feature-column standardization; constants stored for unit recovery."""
    mean = ds.X.mean(axis=0)
    scale = ds.X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    constants = {name: (float(m), float(s))
                 for name, m, s in zip(ds.columns, mean, scale)}
    return replace(ds, X=(ds.X - mean) / scale, normalization=constants)


def split(ds: Dataset, train_fraction: float, mode: str = "chronological",
          seed=0) -> tuple[Dataset, Dataset]:
    """Train/test split: order-preserving by default, seeded shuffle otherwise."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train fraction must be in (0, 1), got {train_fraction}")
    if mode not in ("chronological", "shuffled"):
        raise ConfigError(f"unknown split mode {mode!r}")
    k = int(math.floor(train_fraction * ds.n + 1e-9))
    if k < 1 or k >= ds.n:
        raise ConfigError(f"split leaves an empty side (n={ds.n}, fraction={train_fraction})")
    if mode == "chronological":
        train_idx = np.arange(k)
        test_idx = np.arange(k, ds.n)
    else:
        perm = np.random.default_rng(seed).permutation(ds.n)
        train_idx = np.sort(perm[:k])
        test_idx = np.sort(perm[k:])
    return ds.take(train_idx), ds.take(test_idx)
