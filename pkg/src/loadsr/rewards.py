"""Reward squashing, empirical quantile threshold, and the candidate pool."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyPoolError


def reward(rmse: float) -> float:
    """Squashed reward 1 / (1 + rmse), strictly decreasing, range (0, 1]."""
    if rmse < 0 or not math.isfinite(rmse):
        raise ConfigError(f"rmse must be a finite nonnegative value, got {rmse}")
    return 1.0 / (1.0 + rmse)


def empirical_quantile(rewards, fraction: float) -> float:
    """Threshold below which a sample leaves the top ``fraction`` of the batch.

    Sorts descending and returns the k-th best value with k = ceil(fraction * N),
    so at least the top-``fraction`` share (rounded up) satisfies r >= threshold.
    The result is always an element of ``rewards``.
    """
    values = np.asarray(rewards, dtype=float)
    if values.size == 0:
        raise ConfigError("cannot take a quantile of an empty reward vector")
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    k = min(values.size, max(1, math.ceil(fraction * values.size - 1e-12)))
    return float(np.sort(values)[::-1][k - 1])


@dataclass
class Candidate:
    """A pooled expression: sampled assignment, coarse coefficients, reward."""

    assignment: tuple[int, ...]
    coefficients: np.ndarray
    reward: float
    iteration: int

    def __post_init__(self):
        self.assignment = tuple(int(a) for a in self.assignment)
        if not (math.isfinite(self.reward) and 0.0 < self.reward <= 1.0):
            raise ConfigError(f"candidate reward must lie in (0, 1], got {self.reward}")


@dataclass
class CandidatePool:
    """Fixed-capacity store of the best candidates seen, deduplicated by assignment.

    Entries stay sorted by descending reward; ties rank the earlier
    discovery first. Re-inserting a known assignment keeps whichever
    copy has the higher reward (coefficients included) but preserves
    the original discovery iteration.
    """

    capacity: int
    entries: list[Candidate] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigError(f"pool capacity must be >= 1, got {self.capacity}")

    def __len__(self) -> int:
        return len(self.entries)

    def _sort(self):
        self.entries.sort(key=lambda c: (-c.reward, c.iteration))

    def insert(self, candidate: Candidate) -> bool:
        """Offer a candidate; returns True if the pool changed."""
        for entry in self.entries:
            if entry.assignment == candidate.assignment:
                if candidate.reward > entry.reward:
                    entry.reward = candidate.reward
                    entry.coefficients = candidate.coefficients
                    self._sort()
                    return True
                return False
        if len(self.entries) < self.capacity:
            self.entries.append(candidate)
            self._sort()
            return True
        if candidate.reward > self.entries[-1].reward:
            self.entries[-1] = candidate
            self._sort()
            return True
        return False

    def best(self) -> Candidate:
        """Max-reward entry; ties resolve to the earliest discovery."""
        if not self.entries:
            raise EmptyPoolError("candidate pool is empty")
        return self.entries[0]

    def min_reward(self) -> float:
        if not self.entries:
            raise EmptyPoolError("candidate pool is empty")
        return self.entries[-1].reward


def pool_insert(pool: CandidatePool, candidate: Candidate) -> CandidatePool:
    """Functional-style wrapper over CandidatePool.insert."""
    pool.insert(candidate)
    return pool


def pool_best(pool: CandidatePool) -> Candidate:
    return pool.best()
