"""Group-relative advantages with difficulty- and entropy-aware rescaling.

Per task group i with rewards r_ij and per-sample policy entropies H_ij::

    A_ij   = (r_ij - mean(r_i)) / (std(r_i) + eps)
    D_i    = 1 - mean(r_i)
    alpha_i = max(floor, 1 + lambda * (D_i - mean_i D_i))
    beta_ij = max(floor, 1 + mu * (H_ij - mean_j H_ij))
    A'_ij  = alpha_i * beta_ij * A_ij

The floor keeps both factors positive so rescaling can never flip the sign
of an advantage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

EPS = 1e-8
CLAMP_FLOOR = 0.1


@dataclass(frozen=True)
class AdvantageGroup:
    group_id: str
    rewards: tuple[float, ...]
    entropies: tuple[float, ...]
    lam: float = 0.0
    mu: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        object.__setattr__(self, "entropies", tuple(float(h) for h in self.entropies))
        if not self.rewards:
            raise ValueError(f"group {self.group_id!r} is empty")
        if len(self.rewards) != len(self.entropies):
            raise ValueError(f"group {self.group_id!r}: rewards and entropies differ in length")
        if any(not 0.0 <= r <= 1.0 for r in self.rewards):
            raise ValueError(f"group {self.group_id!r}: rewards must lie in [0, 1]")
        if any(h < 0 for h in self.entropies):
            raise ValueError(f"group {self.group_id!r}: entropies must be non-negative")
        if self.lam < 0 or self.mu < 0:
            raise ValueError("lambda and mu must be non-negative")


@dataclass(frozen=True)
class ShapedAdvantages:
    base: tuple[float, ...]
    difficulty: float
    alpha: float
    beta: tuple[float, ...]
    shaped: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"base": list(self.base), "difficulty": self.difficulty, "alpha": self.alpha,
                "beta": list(self.beta), "shaped": list(self.shaped)}


def group_normalize(rewards: Sequence[float], eps: float = EPS) -> np.ndarray:
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("empty reward group")
    if r.max() == r.min():
        return np.zeros_like(r)
    dev = r - r.mean()
    dev -= dev.mean()  # second pass removes the rounding residue of the mean
    return dev / (np.sqrt(np.mean(dev * dev)) + eps)


def difficulty(rewards: Sequence[float]) -> float:
    return 1.0 - float(np.mean(rewards))


def group_scale(d_i: float, d_bar: float, lam: float, floor: float = CLAMP_FLOOR) -> float:
    return max(floor, 1.0 + lam * (d_i - d_bar))


def sample_scale(h_ij: float, h_bar: float, mu: float, floor: float = CLAMP_FLOOR) -> float:
    return max(floor, 1.0 + mu * (h_ij - h_bar))


def shape(group: AdvantageGroup, d_bar: float, floor: float = CLAMP_FLOOR) -> ShapedAdvantages:
    base = group_normalize(group.rewards)
    d_i = difficulty(group.rewards)
    alpha = group_scale(d_i, d_bar, group.lam, floor)
    h_bar = float(np.mean(group.entropies))
    beta = [sample_scale(h, h_bar, group.mu, floor) for h in group.entropies]
    shaped = [alpha * b * a for a, b in zip(base, beta)]
    return ShapedAdvantages(tuple(float(a) for a in base), d_i, alpha, tuple(beta), tuple(shaped))


def batch_difficulty(groups: Sequence[AdvantageGroup]) -> float:
    """Unweighted mean of group difficulties over the batch."""
    return float(np.mean([difficulty(g.rewards) for g in groups]))


def shape_batch(groups: Sequence[AdvantageGroup], floor: float = CLAMP_FLOOR) -> list[ShapedAdvantages]:
    d_bar = batch_difficulty(groups)
    return [shape(g, d_bar, floor) for g in groups]


# --- rollout filtering -----------------------------------------------------


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def deviation_score(candidate: Sequence[int], references: Sequence[Sequence[int]]) -> float:
    """Smallest length-normalized edit distance from ``candidate`` to any reference."""
    if not references:
        raise ValueError("deviation_score needs at least one reference")
    best = 1.0
    for ref in references:
        longest = max(len(candidate), len(ref))
        score = 0.0 if longest == 0 else levenshtein(candidate, ref) / longest
        best = min(best, score)
    return best


def should_resample(score: float, tau: float) -> bool:
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    return score > tau
