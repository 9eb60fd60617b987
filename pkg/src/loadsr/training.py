"""Gradient-descent training of tree coefficients (coarse and fine stages)."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, DegenerateEvaluationError
from .tree import ExpressionTree, loss_and_gradients

CLIP_NORM = 10.0
FINE_TUNE_PATIENCE = 25
FINE_TUNE_TOL = 1e-9


@dataclass
class TrainReport:
    final_mse: float
    iterations: int
    diverged: bool
    loss_trace: list[float] | None = None


def _descend(tree: ExpressionTree, X, y, learning_rate: float, iterations: int,
             clip_norm: float | None, patience: int | None, tol: float,
             keep_trace: bool) -> tuple[ExpressionTree, TrainReport]:
    if learning_rate <= 0:
        raise ConfigError(f"learning rate must be positive, got {learning_rate}")
    if iterations < 1:
        raise ConfigError(f"iteration count must be >= 1, got {iterations}")

    try:
        mse, grad = loss_and_gradients(tree, X, y)
    except DegenerateEvaluationError:
        return tree, TrainReport(math.inf, 0, True, [] if keep_trace else None)

    w = tree.coefficients
    best_w = w.copy()
    best_mse = mse
    trace = [mse] if keep_trace else None
    steps = 0
    stall = 0
    diverged = False

    for _ in range(iterations):
        if clip_norm is not None:
            norm = math.sqrt(float((grad * grad).sum()))
            if norm > clip_norm:
                grad = grad * (clip_norm / norm)
        w = w - learning_rate * grad
        tree.coefficients = w
        steps += 1
        prev = mse
        try:
            mse, grad = loss_and_gradients(tree, X, y)
        except DegenerateEvaluationError:
            diverged = True
            break
        if keep_trace:
            trace.append(mse)
        if mse < best_mse:
            best_mse = mse
            best_w = w.copy()
        if patience is not None:
            if (prev - mse) / max(prev, 1e-300) < tol:
                stall += 1
                if stall >= patience:
                    break
            else:
                stall = 0

    tree.coefficients = best_w
    return tree, TrainReport(best_mse, steps, diverged, trace)


def train_critic(tree: ExpressionTree, X, y, learning_rate: float,
                 iterations: int, clip_norm: float | None = CLIP_NORM,
                 keep_trace: bool = False) -> tuple[ExpressionTree, TrainReport]:
    """Coarse stage: fixed number of clipped descent steps, best-seen kept.

    A degenerate evaluation at step 0 yields a diverged report with
    infinite mse (zero reward downstream); divergence later on stops the
    loop and restores the best finite coefficients seen.
    """
    return _descend(tree, X, y, learning_rate, iterations, clip_norm,
                    patience=None, tol=0.0, keep_trace=keep_trace)


def fine_tune(tree: ExpressionTree, X, y, learning_rate: float,
              iterations: int, clip_norm: float | None = CLIP_NORM,
              keep_trace: bool = False) -> tuple[ExpressionTree, TrainReport]:
    """Refinement stage for pool candidates: smaller steps, early stopping.

    Stops once the relative loss improvement stays below 1e-9 for 25
    consecutive steps. Callers pass a tenth of the coarse learning rate.
    """
    return _descend(tree, X, y, learning_rate, iterations, clip_norm,
                    patience=FINE_TUNE_PATIENCE, tol=FINE_TUNE_TOL,
                    keep_trace=keep_trace)
