"""Seeded generators for randomized checks and fixtures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from triepack.trajectory import Message, SessionTree, ToolOutcome, Trajectory
from triepack.trie import build_trie, trie_stats


@dataclass(frozen=True)
class Case:
    seed: int
    V: int
    d: int
    trajectories: tuple[Trajectory, ...]
    normalization: str
    budget: int


def random_trajectories(rng: np.random.Generator, V: int, n: int, max_len: int = 16,
                        share_prob: float = 0.85, mask_prob: float = 0.75) -> list[Trajectory]:
    """Trajectories that branch off random prefixes of earlier ones (masks copied with the prefix)."""
    tokens: list[list[int]] = []
    masks: list[list[int]] = []
    for i in range(n):
        if tokens and rng.random() < share_prob:
            j = int(rng.integers(len(tokens)))
            k = int(rng.integers(1, len(tokens[j]) + 1))
            toks, mask = tokens[j][:k], masks[j][:k]
        else:
            toks, mask = [], []
        length = int(rng.integers(max(2, len(toks)), max_len + 1))
        extra = length - len(toks)
        toks = toks + [int(t) for t in rng.integers(0, V, size=extra)]
        mask = mask + [int(m) for m in rng.random(extra) < mask_prob]
        tokens.append(toks)
        masks.append(mask)
    return [Trajectory(f"t{i}", t, m) for i, (t, m) in enumerate(zip(tokens, masks))]


def random_case(seed: int) -> Case:
    rng = np.random.default_rng(seed)
    V = int(rng.integers(5, 17))
    d = int(rng.choice([2, 4, 6, 8]))
    n = int(rng.integers(2, 9))
    trajs = random_trajectories(rng, V, n)
    trie = build_trie(trajs)
    lo = max(len(t) for t in trajs)
    hi = trie_stats(trie)["unique_tokens"]
    budget = int(rng.integers(lo, hi + 1))
    normalization = ("trajectory_mean", "token_mean")[seed % 2]
    return Case(seed, V, d, tuple(trajs), normalization, budget)


def random_session(rng: np.random.Generator, session_id: str, n_messages: int = 10, V: int = 32,
                   error_prob: float = 0.3, boundary_prob: float = 0.15,
                   branch_prob: float = 0.25) -> SessionTree:
    """A branching session with planted tool errors and context boundaries."""
    messages = [Message("system", tuple(int(t) for t in rng.integers(0, V, size=int(rng.integers(1, 5)))))]
    for i in range(1, n_messages):
        parent = int(rng.integers(i)) if rng.random() < branch_prob else None
        role = str(rng.choice(["user", "assistant", "assistant", "tool"]))
        tool = None
        if role == "assistant" and rng.random() < 0.6:
            status = "error" if rng.random() < error_prob else "ok"
            tool = ToolOutcome(str(rng.choice(["bash", "edit", "grep", "pytest"])), status)
        boundary = "none"
        if rng.random() < boundary_prob:
            boundary = str(rng.choice(["compression", "mode_switch"]))
        toks = tuple(int(t) for t in rng.integers(0, V, size=int(rng.integers(1, 6))))
        messages.append(Message(role, toks, tool, boundary, parent))
    return SessionTree(session_id, tuple(messages))


def random_corpus(seed: int, n_sessions: int = 20, **kw) -> list[SessionTree]:
    rng = np.random.default_rng(seed)
    return [random_session(rng, f"s{i}", n_messages=int(rng.integers(4, 14)), **kw)
            for i in range(n_sessions)]
