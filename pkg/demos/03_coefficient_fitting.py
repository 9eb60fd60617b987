"""Coefficient training: coarse descent, then fine-tuning on a ZIP curve."""

import numpy as np

from loadsr import (TrajectoryConfig, assign_operators, build_template,
                    default_library, fine_tune, gen_zip, init_params,
                    train_critic)

lib = default_library(1)

# simple line: a depth-1 identity tree is y = a*(b*x) + c
t1 = build_template(1, 1)
tree = init_params(assign_operators(t1, lib, [0, 0]), seed=0)
x = np.random.default_rng(0).uniform(-1, 1, size=200).reshape(-1, 1)
y = 3.0 * x[:, 0] + 1.0
tree, report = train_critic(tree, x, y, learning_rate=0.1, iterations=500)
a, b, c = tree.coefficients
print(f"line fit: mse {report.final_mse:.2e}, a*b = {a * b:.5f} (want 3), c = {c:.5f} (want 1)")

# quadratic load curve: depth-3 tree with a product joint is the ZIP form
cfg = TrajectoryConfig(kind="zip", duration=12.0, dt=0.06, fault_time=1.0,
                       dip=0.7, recovery_tau=4.0, noise_sigma=0.0)
ds = gen_zip(cfg, rng=0)
t3 = build_template(3, 1)
mul_id = next(op.id for op in lib.binary if op.name == "mul")
zip_tree = init_params(assign_operators(t3, lib, [0, 0, mul_id, 0, 0, 0]), seed=0)

zip_tree, coarse = train_critic(zip_tree, ds.X, ds.y, 0.2, 100)
print(f"\nZIP curve, coarse (100 steps):    mse {coarse.final_mse:.3e}")
zip_tree, fine = fine_tune(zip_tree, ds.X, ds.y, 0.02, 20000)
print(f"ZIP curve, fine-tuned ({fine.iterations} steps): mse {fine.final_mse:.3e}")
