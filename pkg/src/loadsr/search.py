"""End-to-end expression search.

One outer iteration samples a batch of operator assignments from the
policy, coarse-trains each assignment's tree coefficients, converts the
resulting error into a squashed reward, feeds the candidate pool, and
then applies one policy update over the whole batch. After the final
iteration every pooled candidate is fine-tuned and the lowest-MSE one
becomes the result.

Coefficient initialization is seeded from (run seed, assignment), so a
re-sampled assignment trains to the identical result; coarse trainings
are therefore memoized within a run. Disabling the cache changes
nothing but wall time.

Reported train/test RMSE are those of the *rendered* expression string
(parsed back and evaluated), so the manifest metrics always describe
the expression a user can copy out of it.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .batch_training import train_batch
from .data import Dataset
from .errors import ConfigError, DataError, SearchError
from .metrics import rmse
from .operators import DEFAULT_BINARY, DEFAULT_UNARY, GUARD_EPSILON, build_library
from .parsing import parse_expression
from .policy import (BASELINE_DECAY, Policy, new_policy, risk_seeking_update,
                     sample_batch, standard_update, _ascent_step)
from .rewards import Candidate, CandidatePool, empirical_quantile, reward
from .training import CLIP_NORM, fine_tune, train_critic
from .tree import assign_operators, build_template, init_params, render

log = logging.getLogger(__name__)

POLICY_MODES = ("risk_seeking", "standard")


@dataclass
class SearchConfig:
    """All knobs of one search run; defaults give a minutes-scale desk run."""

    depth: int = 5
    risk_fraction: float = 0.5
    policy_mode: str = "risk_seeking"
    search_iterations: int = 200   # outer policy iterations
    critic_iterations: int = 100   # coarse descent steps per sampled tree
    finetune_iterations: int = 2000
    batch_size: int = 32
    pool_size: int = 16
    actor_lr: float = 0.1
    critic_lr: float = 0.05
    entropy_coef: float = 0.0
    seed: int = 0
    unary_ops: tuple = DEFAULT_UNARY
    binary_ops: tuple = DEFAULT_BINARY
    guard_epsilon: float = GUARD_EPSILON
    clip_norm: float = CLIP_NORM
    per_sample_update: bool = False
    reuse_critic_cache: bool = True
    batched_critic: bool = True  # tensorized fast path; same results per tree

    def validate(self):
        for name in ("search_iterations", "critic_iterations",
                     "finetune_iterations", "batch_size", "pool_size", "depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 < self.risk_fraction <= 1.0:
            raise ConfigError(f"risk_fraction must be in (0, 1], got {self.risk_fraction}")
        if self.policy_mode not in POLICY_MODES:
            raise ConfigError(f"policy_mode must be one of {POLICY_MODES}, "
                              f"got {self.policy_mode!r}")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.entropy_coef < 0:
            raise ConfigError("entropy_coef must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["unary_ops"] = list(self.unary_ops)
        out["binary_ops"] = list(self.binary_ops)
        return out


@dataclass
class SearchResult:
    """Outcome of one run: the winning expression plus full diagnostics."""

    expression: str
    assignment: tuple[int, ...]
    coefficients: list[float]
    train_rmse: float
    test_rmse: float | None
    pool_report: list[dict]
    best_reward_trace: list[float]
    wall_time: float
    policy_checkpoint: dict
    diagnostics: dict

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["assignment"] = list(self.assignment)
        return out


def best_reward_trace(result: SearchResult) -> list[float]:
    """Per-iteration running maximum of pool rewards (non-decreasing)."""
    return list(result.best_reward_trace)


def _emit(callback, event: str, **payload):
    if callback is not None:
        callback(event, payload)


def _coarse_result(template, library, assignment, config, X, y):
    """Train one sampled assignment from its deterministic init; reward 0 if degenerate."""
    tree = assign_operators(template, library, assignment)
    init_params(tree, np.random.SeedSequence([config.seed, *assignment]))
    tree, report = train_critic(tree, X, y, config.critic_lr,
                                config.critic_iterations, config.clip_norm)
    if math.isfinite(report.final_mse):
        value = reward(math.sqrt(report.final_mse))
        return value, tree.coefficients.copy(), report
    return 0.0, None, report


def run_search(config: SearchConfig, train: Dataset, test: Dataset | None = None,
               callback=None) -> SearchResult:
    """Execute the full search on a training set; see the module docstring."""
    config.validate()
    if train is None or train.n < 1:
        raise DataError("training dataset is empty")
    X = np.ascontiguousarray(train.X, dtype=float)
    y = np.ascontiguousarray(train.y, dtype=float)

    library = build_library(config.unary_ops, config.binary_ops,
                            train.d, config.guard_epsilon)
    template = build_template(config.depth, train.d)
    seed_seq = np.random.SeedSequence(config.seed)
    policy_seed, sample_seed = seed_seq.spawn(2)
    policy = new_policy(template, library, config.actor_lr,
                        config.entropy_coef, seed=policy_seed)
    sample_rng = np.random.default_rng(sample_seed)

    pool = CandidatePool(config.pool_size)
    cache: dict[tuple[int, ...], tuple] = {}
    trace: list[float] = []
    stats = {"degenerate_samples": 0, "cache_hits": 0, "skipped_iterations": 0}
    started = time.perf_counter()

    for i in range(config.search_iterations):
        batch = sample_batch(policy, config.batch_size, rng=sample_rng)
        _emit(callback, "sample_batch", iteration=i, size=len(batch))

        precomputed: dict[tuple[int, ...], tuple] = {}
        if config.batched_critic:
            pending = [a for a, _ in batch
                       if not (config.reuse_critic_cache and a in cache)]
            todo = list(dict.fromkeys(pending))  # dedupe, keep sample order
            if todo:
                trained = train_batch(template, library, todo, X, y,
                                      config.critic_lr, config.critic_iterations,
                                      config.clip_norm, config.seed)
                precomputed = dict(zip(todo, trained))

        rewards: list[float] = []
        for j, (assignment, _) in enumerate(batch):
            if config.reuse_critic_cache and assignment in cache:
                cached = True
                value, coeffs, report = cache[assignment]
                stats["cache_hits"] += 1
            else:
                cached = False
                if assignment in precomputed:
                    value, coeffs, report = precomputed[assignment]
                else:
                    value, coeffs, report = _coarse_result(
                        template, library, assignment, config, X, y)
                if config.reuse_critic_cache:
                    cache[assignment] = (value, coeffs, report)
            _emit(callback, "critic_trained", iteration=i, sample=j,
                  steps=report.iterations, cached=cached, diverged=report.diverged)
            rewards.append(value)
            _emit(callback, "reward", iteration=i, sample=j, value=value)
            if value > 0.0:
                inserted = pool.insert(Candidate(assignment, coeffs, value, i))
                _emit(callback, "pool_updated", iteration=i, sample=j,
                      inserted=inserted)
            else:
                stats["degenerate_samples"] += 1

        if all(r == 0.0 for r in rewards):
            stats["skipped_iterations"] += 1
            log.warning("iteration %d: every sampled expression was degenerate; "
                        "policy left unchanged", i)
            _emit(callback, "iteration_skipped", iteration=i)
        else:
            pairs = [(a, r) for (a, _), r in zip(batch, rewards)]
            if config.per_sample_update:
                _per_sample_updates(policy, pairs, config)
            elif config.policy_mode == "risk_seeking":
                risk_seeking_update(policy, pairs, config.risk_fraction)
            else:
                standard_update(policy, pairs)
            _emit(callback, "policy_update", iteration=i, mode=config.policy_mode)

        trace.append(pool.best().reward if len(pool) else 0.0)

    if not len(pool):
        raise SearchError("search ended with an empty candidate pool "
                          "(every sampled expression was degenerate)")

    fine_lr = config.critic_lr / 10.0
    report_rows = []
    best_entry = None
    for entry in pool.entries:
        tree = assign_operators(template, library, entry.assignment)
        tree.coefficients = entry.coefficients.copy()
        tree, rep = fine_tune(tree, X, y, fine_lr, config.finetune_iterations,
                              config.clip_norm)
        _emit(callback, "fine_tuned", assignment=entry.assignment,
              mse=rep.final_mse, steps=rep.iterations)
        row = {
            "assignment": list(entry.assignment),
            "reward": entry.reward,
            "discovered_iteration": entry.iteration,
            "fine_tuned_mse": rep.final_mse,
            "expression": render(tree),
        }
        report_rows.append(row)
        if best_entry is None or rep.final_mse < best_entry[0]:
            best_entry = (rep.final_mse, entry, tree)

    _, winner, winner_tree = best_entry
    expression = render(winner_tree)
    parsed = parse_expression(expression, library)
    train_rmse = rmse(y, parsed.evaluate(X))
    test_rmse = None
    if test is not None and test.n:
        test_rmse = rmse(test.y, parsed.evaluate(test.X))

    return SearchResult(
        expression=expression,
        assignment=winner.assignment,
        coefficients=winner_tree.coefficients.tolist(),
        train_rmse=train_rmse,
        test_rmse=test_rmse,
        pool_report=report_rows,
        best_reward_trace=trace,
        wall_time=time.perf_counter() - started,
        policy_checkpoint=policy.to_arrays(),
        diagnostics=stats,
    )


def _per_sample_updates(policy: Policy, pairs, config: SearchConfig):
    """Update-inside-the-loop variant: one small step per sample, in sample order.

    Thresholds (risk mode) and the baseline (standard mode) use only the
    rewards observed so far in the batch; every step is scaled by 1/N so
    the total magnitude matches the batched estimator.
    """
    n = len(pairs)
    seen: list[float] = []
    for assignment, value in pairs:
        seen.append(value)
        if config.policy_mode == "risk_seeking":
            threshold = empirical_quantile(seen, config.risk_fraction)
            weight = value - threshold if value >= threshold else 0.0
        else:
            weight = value - policy.baseline
        _ascent_step(policy, [assignment], np.array([weight / n]))
    if config.policy_mode == "standard":
        values = np.asarray([v for _, v in pairs])
        policy.baseline = (BASELINE_DECAY * policy.baseline
                           + (1.0 - BASELINE_DECAY) * float(values.mean()))
