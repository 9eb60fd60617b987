"""Fixed-shape trainable trees: build, evaluate, render, parse back.

The template alternates unary and binary operator layers; a sampled
assignment picks one operator (or input variable) per in-order position,
and every operator node carries trainable scale/bias coefficients.
"""

import numpy as np

from loadsr import (assign_operators, build_template, default_library,
                    evaluate, init_params, parse_expression, render)

lib = default_library(n_variables=1)

for depth in (1, 3, 5):
    t = build_template(depth, 1)
    print(f"depth {depth}: {t.n_unary} unary + {t.n_binary} binary nodes, "
          f"{t.n_leaves} leaves, {t.n_coefficients} coefficients")

# depth 3, in-order positions: leaf, unary, binary, leaf, unary, root unary
t = build_template(3, 1)
sin_id = next(op.id for op in lib.unary if op.name == "sin")
mul_id = next(op.id for op in lib.binary if op.name == "mul")
tree = assign_operators(t, lib, [0, 0, mul_id, 0, 0, sin_id])
tree = init_params(tree, seed=1)

x = np.linspace(-2, 2, 5).reshape(-1, 1)
pred = evaluate(tree, x)
print("\ninputs: ", x.ravel())
print("outputs:", np.round(pred.values, 4))

text = render(tree)
print("\nrendered:", text)

again = parse_expression(text).evaluate(x)
print("max |render->parse->eval - direct| =", np.max(np.abs(again - pred.values)),
      "(coefficients print at 6 significant digits, hence the small gap)")
