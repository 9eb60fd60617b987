"""A miniature benchmark suite run (small budget, 2 tasks x 2 seeds).

The full suite (all tasks, 10 seeds, default budget) is what the
acceptance tests run; see README for the CLI equivalent.
"""

from loadsr.benchmark import SuiteConfig, run_suite

config = SuiteConfig(
    tasks=("zip_fault", "sin_wave"),
    seeds=(0, 1),
    reports=("policy", "models"),
    workers=2,
    overrides=dict(search_iterations=10, batch_size=8,
                   critic_iterations=40, finetune_iterations=200, pool_size=6),
)
report = run_suite(config)
print(report.render_text())
print(f"suite wall time: {report.wall_time:.1f}s")
