"""End-to-end search on a synthetic fault trace (reduced budget, ~20 s).

Generates a noise-free ZIP response, searches for an expression, and
prints the discovered formula with its errors. Increase the budget to
the defaults (search_iterations=200, batch_size=32, ...) for production
quality; this demo shrinks it to stay quick.
"""

from loadsr import SearchConfig, TrajectoryConfig, gen_zip, run_search, split

cfg = TrajectoryConfig(kind="zip", duration=12.0, dt=0.06, fault_time=1.0,
                       dip=0.7, recovery_tau=4.0, noise_sigma=0.0)
ds = gen_zip(cfg, rng=11)
train, test = split(ds, 0.8, mode="shuffled", seed=0)

config = SearchConfig(search_iterations=40, batch_size=16, pool_size=8, seed=0)
result = run_search(config, train, test)

print("expression:", result.expression)
print(f"train rmse {result.train_rmse:.2e}   test rmse {result.test_rmse:.2e}")
print("pool (top 3 by reward):")
for row in result.pool_report[:3]:
    print(f"  reward {row['reward']:.4f}  fine-tuned mse {row['fine_tuned_mse']:.2e}")
print("best-reward trace (every 10th):",
      [round(r, 4) for r in result.best_reward_trace[::10]])
