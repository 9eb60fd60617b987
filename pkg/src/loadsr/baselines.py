"""Reference fits the engine is benchmarked against: polynomials and static ZIP."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, FitError
from .data import Dataset
from .metrics import rmse

RIDGE = 1e-10


@dataclass
class BaselineFit:
    kind: str
    parameters: dict
    train_rmse: float
    test_rmse: float | None = None
    _predict: Callable = field(default=None, repr=False)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self._predict(X)

    def score(self, ds: Dataset) -> float:
        return rmse(ds.y, self.predict(ds.X))


def _solve_normal_equations(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise FitError(f"design matrix is rank deficient "
                       f"(rank {np.linalg.matrix_rank(A)} < {A.shape[1]} columns)")
    gram = A.T @ A + RIDGE * np.eye(A.shape[1])
    try:
        return np.linalg.solve(gram, A.T @ y)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"normal equations unsolvable: {exc}") from None


def _monomials(X: np.ndarray, degree: int) -> tuple[np.ndarray, list[str]]:
    n, d = X.shape
    if d == 1:
        cols = [X[:, 0] ** p for p in range(degree + 1)]
        names = ["1"] + [f"x0^{p}" if p > 1 else "x0" for p in range(1, degree + 1)]
        return np.column_stack(cols), names
    # multivariate designs stop at total degree 2
    cols = [np.ones(n)]
    names = ["1"]
    for i in range(d):
        cols.append(X[:, i])
        names.append(f"x{i}")
    for i in range(d):
        for j in range(i, d):
            cols.append(X[:, i] * X[:, j])
            names.append(f"x{i}^2" if i == j else f"x{i}*x{j}")
    return np.column_stack(cols), names


def fit_polynomial(ds: Dataset, degree: int) -> BaselineFit:
    """Ordinary least squares on a monomial design (tiny ridge for conditioning)."""
    if degree < 1:
        raise ConfigError(f"polynomial degree must be >= 1, got {degree}")
    A, names = _monomials(ds.X, degree)
    beta = _solve_normal_equations(A, ds.y)

    d = ds.d

    def predict(X: np.ndarray) -> np.ndarray:
        design, _ = _monomials(X, degree)
        return design @ beta

    fit = BaselineFit(
        kind=f"polynomial(degree={degree if d == 1 else 2})",
        parameters={"terms": dict(zip(names, beta.tolist()))},
        train_rmse=0.0,
        _predict=predict,
    )
    fit.train_rmse = fit.score(ds)
    return fit


def fit_zip(ds: Dataset) -> BaselineFit:
    """Constrained static load fit P = p0 * (a_z V^2 + a_i V + a_p), shares summing to 1.

    Solved as unconstrained least squares over (p0*a_z, p0*a_i, p0*a_p);
    the normalization into p0 and shares is pure reporting, so predictions
    are exactly those of the raw least-squares coefficients.
    """
    if ds.d != 1:
        raise ConfigError(f"ZIP fit expects a single voltage feature, got d={ds.d}")
    v = ds.X[:, 0]
    if np.any(v <= 0):
        raise FitError("ZIP fit requires strictly positive voltage samples")
    if np.ptp(v) == 0:
        raise FitError("constant voltage trace: ZIP design is rank deficient")
    A = np.column_stack([v**2, v, np.ones_like(v)])
    q = _solve_normal_equations(A, ds.y)
    p0 = float(q.sum())
    if abs(p0) < 1e-12:
        raise FitError("fitted ZIP magnitude is ~0; shares are undefined")

    def predict(X: np.ndarray) -> np.ndarray:
        vv = X[:, 0]
        return q[0] * vv**2 + q[1] * vv + q[2]

    fit = BaselineFit(
        kind="zip",
        parameters={"p0": p0, "a_z": float(q[0] / p0), "a_i": float(q[1] / p0),
                    "a_p": float(q[2] / p0)},
        train_rmse=0.0,
        _predict=predict,
    )
    fit.train_rmse = fit.score(ds)
    return fit
