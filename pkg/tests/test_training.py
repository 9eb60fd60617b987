import math

import numpy as np
import pytest

from loadsr import (ConfigError, TrajectoryConfig, assign_operators,
                    build_template, default_library, evaluate, fine_tune,
                    gen_zip, init_params, loss_and_gradients, train_critic)

LIB = default_library(1)


def identity_tree(seed=0):
    t = build_template(1, 1)
    return init_params(assign_operators(t, LIB, [0, 0]), seed)


def linear_data(slope, intercept, n=200, seed=0):
    x = np.random.default_rng(seed).uniform(-1, 1, size=n)
    return x.reshape(-1, 1), slope * x + intercept


def test_linear_recovery():
    X, y = linear_data(3.0, 1.0)
    for seed in range(5):
        tree, report = train_critic(identity_tree(seed), X, y, 0.1, 500)
        a, b, c = tree.coefficients
        assert report.final_mse <= 1e-6
        assert not report.diverged
        assert a * b == pytest.approx(3.0, abs=1e-3)
        assert c == pytest.approx(1.0, abs=1e-3)


def test_iteration_count_must_be_positive():
    X, y = linear_data(1.0, 0.0)
    with pytest.raises(ConfigError):
        train_critic(identity_tree(), X, y, 0.1, 0)
    with pytest.raises(ConfigError):
        train_critic(identity_tree(), X, y, 0.0, 10)


def test_tree_at_minimum_stays_put():
    tree = identity_tree()
    tree.coefficients = np.array([2.0, 1.5, 0.25])
    X = np.linspace(-1, 1, 60).reshape(-1, 1)
    y = 2.0 * (1.5 * X[:, 0]) + 0.25
    before = tree.coefficients.copy()
    tree, report = train_critic(tree, X, y, 0.1, 50)
    assert np.max(np.abs(tree.coefficients - before)) <= 1e-12
    assert report.final_mse == 0.0


def test_single_step_equals_descent_rule():
    X, y = linear_data(2.0, 0.5, seed=3)
    tree = identity_tree(7)
    w0 = tree.coefficients.copy()
    _, grad = loss_and_gradients(tree, X, y)
    tree, report = train_critic(tree, X, y, 0.01, 1, clip_norm=None)
    assert report.iterations == 1
    assert np.max(np.abs(tree.coefficients - (w0 - 0.01 * grad))) <= 1e-12


def test_gradient_clipping_limits_step():
    X = np.full((10, 1), 5.0)
    y = np.full(10, 1e6)  # giant residual, giant gradient
    tree = identity_tree(1)
    w0 = tree.coefficients.copy()
    _, grad = loss_and_gradients(tree, X, y)
    assert np.linalg.norm(grad) > 10.0
    tree, _ = train_critic(tree, X, y, 0.01, 1, clip_norm=10.0)
    step = w0 - tree.coefficients
    assert np.linalg.norm(step) <= 0.01 * 10.0 + 1e-12


def test_divergence_restores_finite_coefficients():
    X, y = linear_data(1.0, 0.0, seed=2)
    y = y * 1e150  # forces overflow without clipping
    tree = identity_tree(4)
    init_mse, _ = loss_and_gradients(tree, X, y)
    tree, report = train_critic(tree, X, y, 10.0, 50, clip_norm=None)
    assert report.diverged
    assert np.all(np.isfinite(tree.coefficients))
    assert report.final_mse <= init_mse


def test_degenerate_at_step_zero_reports_divergence():
    tree = identity_tree(0)
    tree.coefficients = np.array([1e308, 1e308, 0.0])
    tree, report = train_critic(tree, [[10.0]], [0.0], 0.1, 5)
    assert report.diverged
    assert report.iterations == 0
    assert math.isinf(report.final_mse)


def test_monotone_best_seen():
    rng = np.random.default_rng(0)
    lib = default_library(2)
    t = build_template(3, 2)
    for case in range(10):
        assignment = [rng.integers(t.choice_count(p, lib)) for p in range(t.n_nodes)]
        tree = init_params(assign_operators(t, lib, assignment), case)
        X = rng.uniform(0.5, 1.5, size=(40, 2))
        y = rng.uniform(0, 2, size=40)
        init_mse = float(np.mean((evaluate(tree, X).values - y) ** 2))
        tree, report = train_critic(tree, X, y, 0.05, 60)
        assert report.final_mse <= init_mse + 1e-15


def test_fine_tune_non_increasing_after_coarse():
    X, y = linear_data(3.0, 1.0, seed=5)
    tree, coarse = train_critic(identity_tree(5), X, y, 0.1, 200)
    tree, fine = fine_tune(tree, X, y, 0.01, 500)
    assert fine.final_mse <= coarse.final_mse + 1e-18


def test_fine_tune_early_stop_on_flat_loss():
    tree = identity_tree()
    tree.coefficients = np.array([2.0, 1.5, 0.25])
    X = np.linspace(-1, 1, 60).reshape(-1, 1)
    y = 2.0 * (1.5 * X[:, 0]) + 0.25  # already a perfect fit
    tree, report = fine_tune(tree, X, y, 0.01, 2000)
    assert report.iterations < 2000
    assert report.iterations == 25  # patience window


def test_linear_recovery_matches_normal_equations():
    # negative slopes force the a*b product through a sign flip, which
    # descends past a near-saddle; the budget covers the slow cases
    rng = np.random.default_rng(123)
    x = rng.uniform(-1, 1, size=200)
    X = x.reshape(-1, 1)
    design = np.column_stack([x, np.ones_like(x)])
    for case in range(100):
        slope, intercept = rng.uniform(-3, 3, size=2)
        y = slope * x + intercept
        ref_slope, ref_intercept = np.linalg.lstsq(design, y, rcond=None)[0]
        tree, report = train_critic(identity_tree(case), X, y, 0.1, 4000)
        a, b, c = tree.coefficients
        assert a * b == pytest.approx(ref_slope, abs=1e-3)
        assert c == pytest.approx(ref_intercept, abs=1e-3)


def test_zip_shaped_tree_fine_tunes_to_truth():
    # exact-model recovery: a depth-3 tree with a product joint is the ZIP
    # quadratic; fine-tuning must push the fit two orders below coarse
    cfg = TrajectoryConfig(kind="zip", duration=12.0, dt=0.06, fault_time=1.0,
                           dip=0.7, recovery_tau=4.0, noise_sigma=0.0,
                           a_z=0.4, a_i=0.3, a_p=0.3)
    ds = gen_zip(cfg, rng=0)
    t = build_template(3, 1)
    mul_id = [op.id for op in LIB.binary if op.name == "mul"][0]
    assignment = [0, 0, mul_id, 0, 0, 0]
    for seed in range(3):
        tree = init_params(assign_operators(t, LIB, assignment), seed)
        tree, coarse = train_critic(tree, ds.X, ds.y, 0.2, 100)
        tree, fine = fine_tune(tree, ds.X, ds.y, 0.03, 60_000)
        assert fine.final_mse <= coarse.final_mse
        assert fine.final_mse <= 1e-5, (seed, coarse.final_mse, fine.final_mse)


def test_loss_trace_optional():
    X, y = linear_data(1.0, 0.0)
    _, silent = train_critic(identity_tree(), X, y, 0.1, 10)
    assert silent.loss_trace is None
    _, traced = train_critic(identity_tree(), X, y, 0.1, 10, keep_trace=True)
    assert len(traced.loss_trace) == 11  # initial loss plus one per step
