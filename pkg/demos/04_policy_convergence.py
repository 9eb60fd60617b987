"""The operator-selection policy concentrating on a rewarded assignment.

A toy reward (1.0 for one target assignment, 0.1 otherwise) shows the
risk-seeking update at work. Note the plateau: once the winner fills the
kept top fraction of each batch, the threshold reaches the top reward
and the weights vanish, so the probability stalls a bit above the kept
fraction rather than saturating at 1.
"""

import math

import numpy as np

from loadsr import (build_template, default_library, new_policy,
                    risk_seeking_update, sample_batch)

lib = default_library(1)
template = build_template(1, 1)
target = (0, 5)

for fraction in (0.5, 1.0):
    policy = new_policy(template, lib, learning_rate=0.1, seed=0)
    rng = np.random.default_rng(42)
    trace = []
    for step in range(500):
        batch = sample_batch(policy, 32, rng)
        pairs = [(a, 1.0 if a == target else 0.1) for a, _ in batch]
        risk_seeking_update(policy, pairs, fraction)
        if step % 100 == 99:
            trace.append(math.exp(policy.log_prob(target)))
    print(f"kept fraction {fraction}: p(target) at steps 100..500 ->",
          [round(p, 3) for p in trace])
