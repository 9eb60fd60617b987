"""Tour of the operator library: guarded values and exact derivatives.

Every operator is total over finite inputs -- the guards keep log, sqrt,
division, and exp finite no matter what a sampled expression feeds them.
"""

import numpy as np

from loadsr import apply_binary, apply_unary, d_unary, default_library

lib = default_library(n_variables=1)
print("unary:", ", ".join(op.name for op in lib.unary))
print("binary:", ", ".join(op.name for op in lib.binary))

print("\nguards in action:")
log_safe = lib.unary[6]
div_safe = lib.binary[3]
exp_clamped = lib.unary[5]
print("  log_safe(0)      =", apply_unary(log_safe, 0.0))
print("  div_safe(1, 0)   =", apply_binary(div_safe, 1.0, 0.0))
print("  exp_clamped(1e9) =", apply_unary(exp_clamped, 1e9))

print("\nanalytic derivatives vs central finite differences:")
h = 1e-6
for op in lib.unary:
    u = 0.7
    fd = (apply_unary(op, u + h) - apply_unary(op, u - h)) / (2 * h)
    print(f"  {op.name:<12}: analytic {d_unary(op, u):+.8f}   fd {fd:+.8f}")
