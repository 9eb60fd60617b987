"""Compiled batch-training kernel.

Ports the forward/backward pass of ``loadsr.tree`` and the descent loop
of ``loadsr.training`` to one jitted routine that trains every sampled
tree of a batch without per-step Python dispatch. Operator semantics
(guards, kink conventions, clamp windows) mirror ``loadsr.operators``
exactly; floating-point results may differ from the numpy path at the
last-ulp level because libm and numpy vector routines round differently
and reductions run sequentially here.

Semantic ids are fixed by _SEMANTICS below; the wrapper in
``batch_training`` maps a library's operator names onto them.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# fixed semantic ids for the compiled dispatch
_SEMANTICS = {
    "identity": 0, "sin": 1, "cos": 2, "tanh": 3, "sigmoid": 4,
    "exp_clamped": 5, "log_safe": 6, "sqrt_safe": 7, "relu": 8,
    "tan_safe": 9,
    "add": 100, "sub": 101, "mul": 102, "div_safe": 103,
}

_KIND_UNARY, _KIND_BINARY, _KIND_LEAF = 0, 1, 2


@njit(cache=True, inline="always")
def _uval(sem, u, eps):
    if sem == 0:
        return u
    if sem == 1:
        return math.sin(u)
    if sem == 2:
        return math.cos(u)
    if sem == 3:
        return math.tanh(u)
    if sem == 4:
        z = math.exp(-abs(u))
        return 1.0 / (1.0 + z) if u >= 0.0 else z / (1.0 + z)
    if sem == 5:
        return math.exp(min(max(u, -20.0), 20.0))
    if sem == 6:
        return math.log(abs(u) + eps)
    if sem == 7:
        return math.sqrt(abs(u))
    if sem == 8:
        return u if u > 0.0 else 0.0
    # tan with pole guard
    c = math.cos(u)
    s = 1.0 if c >= 0.0 else -1.0
    return math.sin(u) / (s * max(abs(c), eps))


@njit(cache=True, inline="always")
def _uderiv(sem, u, eps):
    if sem == 0:
        return 1.0
    if sem == 1:
        return math.cos(u)
    if sem == 2:
        return -math.sin(u)
    if sem == 3:
        t = math.tanh(u)
        return 1.0 - t * t
    if sem == 4:
        z = math.exp(-abs(u))
        s = 1.0 / (1.0 + z) if u >= 0.0 else z / (1.0 + z)
        return s * (1.0 - s)
    if sem == 5:
        return math.exp(u) if abs(u) <= 20.0 else 0.0
    if sem == 6:
        sgn = 1.0 if u > 0.0 else (-1.0 if u < 0.0 else 0.0)
        return sgn / (abs(u) + eps)
    if sem == 7:
        root = math.sqrt(abs(u))
        if root > 0.0:
            sgn = 1.0 if u > 0.0 else (-1.0 if u < 0.0 else 0.0)
            return sgn / (2.0 * root)
        return 0.0
    if sem == 8:
        return 1.0 if u > 0.0 else 0.0
    c = math.cos(u)
    if abs(c) < eps:
        s = 1.0 if c >= 0.0 else -1.0
        return c / (s * eps)
    return 1.0 / (c * c)


@njit(cache=True, inline="always")
def _bval(sem, u, v, eps):
    if sem == 100:
        return u + v
    if sem == 101:
        return u - v
    if sem == 102:
        return u * v
    s = 1.0 if v >= 0.0 else -1.0
    return u / (s * max(abs(v), eps))


@njit(cache=True, inline="always")
def _bderiv(sem, u, v, eps):
    if sem == 100:
        return 1.0, 1.0
    if sem == 101:
        return 1.0, -1.0
    if sem == 102:
        return v, u
    s = 1.0 if v >= 0.0 else -1.0
    denom = s * max(abs(v), eps)
    dv = -u / (v * v) if abs(v) >= eps else 0.0
    return 1.0 / denom, dv


@njit(cache=True)
def _uval_vec(sem, u, eps):
    """Vectorized access to the scalar unary value map (test hook)."""
    out = np.empty(u.shape[0])
    for j in range(u.shape[0]):
        out[j] = _uval(sem, u[j], eps)
    return out


@njit(cache=True)
def _uderiv_vec(sem, u, eps):
    out = np.empty(u.shape[0])
    for j in range(u.shape[0]):
        out[j] = _uderiv(sem, u[j], eps)
    return out


@njit(cache=True)
def _bval_vec(sem, u, v, eps):
    out = np.empty(u.shape[0])
    for j in range(u.shape[0]):
        out[j] = _bval(sem, u[j], v[j], eps)
    return out


@njit(cache=True)
def _bderiv_vec(sem, u, v, eps):
    du = np.empty(u.shape[0])
    dv = np.empty(u.shape[0])
    for j in range(u.shape[0]):
        du[j], dv[j] = _bderiv(sem, u[j], v[j], eps)
    return du, dv


@njit(cache=True)
def _loss_grad(kinds, child1, child2, coeff_start, postorder, sem_row,
               X, y, w, eps, values, aux_a, aux_b, adj, grad):
    """One fused loss+gradient evaluation for a single tree.

    Returns the MSE, or inf when any intermediate is non-finite
    (degenerate evaluation).
    """
    n = y.shape[0]
    n_nodes = kinds.shape[0]

    for p in range(n_nodes):
        node = postorder[p]
        kind = kinds[node]
        if kind == _KIND_LEAF:
            var = sem_row[node]
            for j in range(n):
                values[node, j] = X[j, var]
        elif kind == _KIND_UNARY:
            s = coeff_start[node]
            a = w[s]
            b = w[s + 1]
            c = w[s + 2]
            sem = sem_row[node]
            ch = child1[node]
            for j in range(n):
                arg = b * values[ch, j]
                if not math.isfinite(arg):
                    return np.inf
                g = _uval(sem, arg, eps)
                aux_a[node, j] = arg
                aux_b[node, j] = g
                values[node, j] = a * g + c
        else:
            s = coeff_start[node]
            a = w[s]
            b = w[s + 1]
            c = w[s + 2]
            d = w[s + 3]
            sem = sem_row[node]
            lc = child1[node]
            rc = child2[node]
            for j in range(n):
                u = b * values[lc, j]
                v = c * values[rc, j]
                if not (math.isfinite(u) and math.isfinite(v)):
                    return np.inf
                m = _bval(sem, u, v, eps)
                aux_a[node, j] = u
                aux_b[node, j] = v
                values[node, j] = a * m + d

    root = postorder[n_nodes - 1]
    mse = 0.0
    for j in range(n):
        yh = values[root, j]
        if not math.isfinite(yh):
            return np.inf
        r = yh - y[j]
        adj[root, j] = (2.0 / n) * r
        mse += r * r
    mse /= n

    for i in range(grad.shape[0]):
        grad[i] = 0.0

    for p in range(n_nodes - 1, -1, -1):
        node = postorder[p]
        kind = kinds[node]
        if kind == _KIND_LEAF:
            continue
        s = coeff_start[node]
        sem = sem_row[node]
        if kind == _KIND_UNARY:
            a = w[s]
            b = w[s + 1]
            ch = child1[node]
            ga = 0.0
            gb = 0.0
            gc = 0.0
            for j in range(n):
                adj_j = adj[node, j]
                arg = aux_a[node, j]
                a_gp = a * _uderiv(sem, arg, eps)
                z = values[ch, j]
                ga += adj_j * aux_b[node, j]
                gb += adj_j * (a_gp * z)
                gc += adj_j
                adj[ch, j] = adj_j * (a_gp * b)
            grad[s] = ga
            grad[s + 1] = gb
            grad[s + 2] = gc
        else:
            a = w[s]
            b = w[s + 1]
            c = w[s + 2]
            lc = child1[node]
            rc = child2[node]
            ga = 0.0
            gb = 0.0
            gc2 = 0.0
            gd = 0.0
            for j in range(n):
                adj_j = adj[node, j]
                u = aux_a[node, j]
                v = aux_b[node, j]
                du, dv = _bderiv(sem, u, v, eps)
                a_du = a * du
                a_dv = a * dv
                m = _bval(sem, u, v, eps)
                ga += adj_j * m
                gb += adj_j * (a_du * values[lc, j])
                gc2 += adj_j * (a_dv * values[rc, j])
                gd += adj_j
                adj[lc, j] = adj_j * (a_du * b)
                adj[rc, j] = adj_j * (a_dv * c)
            grad[s] = ga
            grad[s + 1] = gb
            grad[s + 2] = gc2
            grad[s + 3] = gd

    for i in range(grad.shape[0]):
        if not math.isfinite(grad[i]):
            return np.inf
    return mse


@njit(cache=True)
def _train_batch_kernel(kinds, child1, child2, coeff_start, postorder,
                        semantics, X, y, W, lr, iterations, clip_norm,
                        eps, best_mse, steps_run, diverged, best_W):
    """Full coarse-training loop for every tree row; fills the out arrays.

    clip_norm < 0 disables clipping. Control flow per tree matches the
    reference loop: evaluate, step, re-evaluate, keep the best finite
    coefficients, stop the tree on a degenerate evaluation.
    """
    n_trees, n_coeff = W.shape
    n_nodes = kinds.shape[0]
    n = y.shape[0]

    values = np.empty((n_nodes, n))
    aux_a = np.empty((n_nodes, n))
    aux_b = np.empty((n_nodes, n))
    adj = np.empty((n_nodes, n))
    grad = np.empty(n_coeff)
    w = np.empty(n_coeff)

    for i in range(n_trees):
        for k in range(n_coeff):
            w[k] = W[i, k]
        sem_row = semantics[i]

        mse = _loss_grad(kinds, child1, child2, coeff_start, postorder,
                         sem_row, X, y, w, eps, values, aux_a, aux_b, adj, grad)
        if not math.isfinite(mse):
            best_mse[i] = np.inf
            steps_run[i] = 0
            diverged[i] = True
            continue

        best = mse
        for k in range(n_coeff):
            best_W[i, k] = w[k]
        steps = 0
        died = False

        for t in range(1, iterations + 1):
            if clip_norm > 0.0:
                total = 0.0
                for k in range(n_coeff):
                    total += grad[k] * grad[k]
                norm = math.sqrt(total)
                if norm > clip_norm:
                    scale = clip_norm / norm
                    for k in range(n_coeff):
                        grad[k] *= scale
            for k in range(n_coeff):
                w[k] -= lr * grad[k]
            steps = t

            mse = _loss_grad(kinds, child1, child2, coeff_start, postorder,
                             sem_row, X, y, w, eps, values, aux_a, aux_b,
                             adj, grad)
            if not math.isfinite(mse):
                died = True
                break
            if mse < best:
                best = mse
                for k in range(n_coeff):
                    best_W[i, k] = w[k]

        best_mse[i] = best
        steps_run[i] = steps
        diverged[i] = died
