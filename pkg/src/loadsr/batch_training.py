"""Coarse-train a whole batch of sampled trees in one compiled call.

All trees of a search iteration share the template and the data, so the
descent loops can run inside one jitted kernel (see ``loadsr._kernels``)
instead of dispatching numpy calls per node per step. Tree-by-tree the
procedure is the one in ``loadsr.training.train_critic`` seeded from
SeedSequence([run_seed, *assignment]); results agree with that reference
path to floating-point reduction-order differences (last-ulp level per
step). When the kernel cannot be used (numba missing or a custom
operator outside the compiled set) the reference path runs per tree.
"""

from __future__ import annotations

import math

import numpy as np

from .operators import OperatorLibrary
from .rewards import reward
from .training import TrainReport, train_critic
from .tree import (BINARY, LEAF, TreeTemplate, assign_operators,
                   draw_coefficients, init_params)

try:
    from ._kernels import _SEMANTICS, _train_batch_kernel
    KERNEL_AVAILABLE = True
except ImportError:  # pragma: no cover - numba not installed
    _SEMANTICS = {}
    _train_batch_kernel = None
    KERNEL_AVAILABLE = False


def _kernel_applicable(library: OperatorLibrary) -> bool:
    if not KERNEL_AVAILABLE:
        return False
    names = [op.name for op in library.unary] + [op.name for op in library.binary]
    return all(name in _SEMANTICS for name in names)


def _train_one_by_one(template, library, assignments, X, y, learning_rate,
                      iterations, clip_norm, run_seed):
    results = []
    for assignment in assignments:
        tree = assign_operators(template, library, assignment)
        init_params(tree, np.random.SeedSequence([run_seed, *assignment]))
        tree, report = train_critic(tree, X, y, learning_rate, iterations,
                                    clip_norm)
        if math.isfinite(report.final_mse):
            results.append((reward(math.sqrt(report.final_mse)),
                            tree.coefficients.copy(), report))
        else:
            results.append((0.0, None, report))
    return results


def train_batch(template: TreeTemplate, library: OperatorLibrary, assignments,
                X: np.ndarray, y: np.ndarray, learning_rate: float,
                iterations: int, clip_norm: float | None,
                run_seed: int) -> list[tuple[float, np.ndarray | None, TrainReport]]:
    """Coarse-train every assignment; returns (reward, coefficients, report) per tree."""
    if not _kernel_applicable(library):
        return _train_one_by_one(template, library, assignments, X, y,
                                 learning_rate, iterations, clip_norm, run_seed)

    n_trees = len(assignments)
    n_nodes = template.n_nodes
    kinds = np.empty(n_nodes, dtype=np.int8)
    child1 = np.full(n_nodes, -1, dtype=np.int32)
    child2 = np.full(n_nodes, -1, dtype=np.int32)
    coeff_start = np.full(n_nodes, -1, dtype=np.int32)
    for idx in range(n_nodes):
        kind = template.kinds[idx]
        kinds[idx] = 2 if kind == LEAF else (1 if kind == BINARY else 0)
        if kind != LEAF:
            children = template.children[idx]
            child1[idx] = children[0]
            if kind == BINARY:
                child2[idx] = children[1]
            coeff_start[idx] = template.coeff_slices[idx][0]
    postorder = np.asarray(template.postorder, dtype=np.int32)

    unary_sem = np.asarray([_SEMANTICS[op.name] for op in library.unary],
                           dtype=np.int32)
    binary_sem = np.asarray([_SEMANTICS[op.name] for op in library.binary],
                            dtype=np.int32)
    choices = np.asarray(assignments, dtype=np.int32)
    semantics = np.empty((n_trees, n_nodes), dtype=np.int32)
    for idx in range(n_nodes):
        kind = template.kinds[idx]
        if kind == LEAF:
            semantics[:, idx] = choices[:, idx]
        elif kind == BINARY:
            semantics[:, idx] = binary_sem[choices[:, idx]]
        else:
            semantics[:, idx] = unary_sem[choices[:, idx]]

    W = np.empty((n_trees, template.n_coefficients))
    for i, assignment in enumerate(assignments):
        rng = np.random.default_rng(np.random.SeedSequence([run_seed, *assignment]))
        W[i] = draw_coefficients(template, rng)

    best_mse = np.empty(n_trees)
    steps_run = np.zeros(n_trees, dtype=np.int64)
    diverged = np.zeros(n_trees, dtype=np.bool_)
    best_W = np.empty_like(W)

    _train_batch_kernel(kinds, child1, child2, coeff_start, postorder,
                        semantics, np.ascontiguousarray(X, dtype=np.float64),
                        np.ascontiguousarray(y, dtype=np.float64), W,
                        float(learning_rate), int(iterations),
                        -1.0 if clip_norm is None else float(clip_norm),
                        float(library.guard_epsilon),
                        best_mse, steps_run, diverged, best_W)

    results = []
    for i in range(n_trees):
        final = float(best_mse[i])
        report = TrainReport(final, int(steps_run[i]), bool(diverged[i]))
        if math.isfinite(final):
            results.append((reward(math.sqrt(final)), best_W[i].copy(), report))
        else:
            results.append((0.0, None, report))
    return results
