"""Categorical operator-selection policy and its gradient-ascent updates.

The tree shape is fixed, so the policy factorizes into one independent
categorical distribution per in-order node position: unary positions
choose among unary operators, binary positions among binary operators,
leaf positions among input variables. Logits start at zero (uniform).

Two update rules are provided: plain REINFORCE with an EWMA baseline,
and the risk-seeking variant that only reinforces samples at or above
the empirical top-fraction reward threshold, weighted by their margin
over it. Both average over the full batch size and support an optional
entropy bonus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .operators import OperatorLibrary
from .rewards import empirical_quantile
from .tree import TreeTemplate

BASELINE_DECAY = 0.9


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


@dataclass
class Policy:
    """Per-position logits plus update hyperparameters and baseline state."""

    template: TreeTemplate
    library: OperatorLibrary
    logits: list[np.ndarray]
    learning_rate: float
    entropy_coef: float = 0.0
    baseline: float = 0.0
    _rng: np.random.Generator = field(default=None, repr=False)

    def probabilities(self, position: int) -> np.ndarray:
        return np.exp(_log_softmax(self.logits[position]))

    def log_prob(self, assignment) -> float:
        """Sum of per-position log softmax probabilities for one assignment."""
        total = 0.0
        for pos, choice in enumerate(assignment):
            total += _log_softmax(self.logits[pos])[choice]
        return float(total)

    def entropy(self) -> float:
        """Entropy of the factorized distribution (sum over positions)."""
        total = 0.0
        for logits in self.logits:
            logp = _log_softmax(logits)
            total -= float(np.exp(logp) @ logp)
        return total

    def to_arrays(self) -> dict:
        """Checkpoint form for run manifests (position-ordered logits)."""
        return {"logits": [l.tolist() for l in self.logits],
                "baseline": self.baseline}

    def restore_arrays(self, state: dict):
        arrays = [np.asarray(l, dtype=float) for l in state["logits"]]
        if len(arrays) != len(self.logits) or any(
                a.shape != l.shape for a, l in zip(arrays, self.logits)):
            raise ConfigError("checkpoint logits do not match the template/library")
        self.logits = arrays
        self.baseline = float(state.get("baseline", 0.0))


def new_policy(template: TreeTemplate, library: OperatorLibrary,
               learning_rate: float, entropy_coef: float = 0.0,
               seed=0) -> Policy:
    """Uniform (zero-logit) policy over the template's choice sets."""
    if learning_rate <= 0:
        raise ConfigError(f"learning rate must be positive, got {learning_rate}")
    if entropy_coef < 0:
        raise ConfigError(f"entropy coefficient must be >= 0, got {entropy_coef}")
    if library.n_variables != template.n_variables:
        raise ConfigError("library variable count does not match template")
    logits = [np.zeros(template.choice_count(pos, library))
              for pos in range(template.n_nodes)]
    return Policy(template, library, logits, learning_rate, entropy_coef,
                  _rng=np.random.default_rng(seed))


def sample_batch(policy: Policy, n: int,
                 rng: np.random.Generator | None = None) -> list[tuple[tuple[int, ...], float]]:
    """Draw ``n`` independent assignments with their log-probabilities."""
    if n < 1:
        raise ConfigError(f"batch size must be >= 1, got {n}")
    if rng is None:
        rng = policy._rng
    n_pos = len(policy.logits)
    choices = np.empty((n, n_pos), dtype=np.int64)
    logps = np.zeros(n)
    for pos in range(n_pos):
        logp = _log_softmax(policy.logits[pos])
        cum = np.cumsum(np.exp(logp))
        cum[-1] = 1.0
        draws = np.searchsorted(cum, rng.random(n), side="right")
        draws = np.minimum(draws, len(cum) - 1)
        choices[:, pos] = draws
        logps += logp[draws]
    return [(tuple(int(c) for c in choices[i]), float(logps[i])) for i in range(n)]


def _ascent_step(policy: Policy, assignments, weights: np.ndarray):
    """theta += lr * mean_i w_i * grad log pi(a_i) + lr * entropy_coef * grad H."""
    n = len(assignments)
    lr = policy.learning_rate
    total_weight = float(weights.sum())
    for pos in range(len(policy.logits)):
        logits = policy.logits[pos]
        logp = _log_softmax(logits)
        probs = np.exp(logp)
        picked = np.fromiter((a[pos] for a in assignments), dtype=np.int64, count=n)
        grad = (np.bincount(picked, weights=weights, minlength=logits.size)
                - total_weight * probs) / n
        if policy.entropy_coef > 0.0:
            ent = -float(probs @ logp)
            grad = grad + policy.entropy_coef * (-probs * (logp + ent))
        policy.logits[pos] = logits + lr * grad


def standard_update(policy: Policy, batch) -> Policy:
    """REINFORCE step with the EWMA baseline; updates the baseline afterwards."""
    if not batch:
        raise ConfigError("cannot update the policy from an empty batch")
    rewards = np.asarray([r for _, r in batch], dtype=float)
    if not np.all(np.isfinite(rewards)):
        raise ConfigError("batch rewards must be finite")
    assignments = [a for a, _ in batch]
    _ascent_step(policy, assignments, rewards - policy.baseline)
    policy.baseline = (BASELINE_DECAY * policy.baseline
                       + (1.0 - BASELINE_DECAY) * float(rewards.mean()))
    return policy


def risk_seeking_update(policy: Policy, batch, risk_fraction: float) -> Policy:
    """Reinforce only the top ``risk_fraction`` of the batch, relative to the threshold.

    Samples at or above the empirical threshold contribute with weight
    (reward - threshold); everything below contributes nothing. The mean
    still runs over the full batch size. With risk_fraction = 1 this is
    exactly the standard update with the batch minimum as baseline.
    """
    if not batch:
        raise ConfigError("cannot update the policy from an empty batch")
    if not 0.0 < risk_fraction <= 1.0:
        raise ConfigError(f"risk fraction must be in (0, 1], got {risk_fraction}")
    rewards = np.asarray([r for _, r in batch], dtype=float)
    if not np.all(np.isfinite(rewards)):
        raise ConfigError("batch rewards must be finite")
    threshold = empirical_quantile(rewards, risk_fraction)
    weights = np.where(rewards >= threshold, rewards - threshold, 0.0)
    _ascent_step(policy, [a for a, _ in batch], weights)
    return policy
