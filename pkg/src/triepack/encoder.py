"""Flatten a pack into training arrays with tree-structured loss weights.

Each shared token is stored once. A token's position id is its depth in
the trajectory, its attention is restricted to its ancestor chain, and the
loss term predicting it is weighted by the number of pack members whose
path runs through it. Summed over the packs of any plan, the weights add up
to exactly what per-trajectory training would give, so parameters feeding
a shared prefix receive the gradient of every suffix that depends on it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from triepack.trie import Trie

NORMALIZATIONS = ("trajectory_mean", "token_mean")


@dataclass(frozen=True)
class LossTarget:
    context_pos: int
    target_token: int
    weight: float


@dataclass(frozen=True)
class EncodedPack:
    tokens: tuple[int, ...]
    parent: tuple[int, ...]
    depth: tuple[int, ...]
    segment: tuple[int, ...]
    targets: tuple[LossTarget, ...]
    trajectory_ids: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def total_weight(self) -> float:
        return sum(t.weight for t in self.targets)


def total_targets(trie: Trie) -> int:
    """Unmasked prediction targets summed over every trajectory of the trie."""
    return sum(t.n_targets for t in trie.trajectories.values())


def normalizer(trie: Trie, normalization: str, n_total_trajectories: int | None = None) -> float:
    if normalization == "trajectory_mean":
        return float(n_total_trajectories or trie.n_trajectories)
    if normalization == "token_mean":
        return float(total_targets(trie))
    raise ValueError(f"unknown normalization {normalization!r}; expected one of {NORMALIZATIONS}")


def encode_pack(trie: Trie, pack: Iterable[str], normalization: str = "trajectory_mean",
                n_total_trajectories: int | None = None) -> EncodedPack:
    """Encode the subtree induced by ``pack``.

    Weights are ``count / N`` (trajectory_mean, N = batch trajectories) or
    ``count / M`` (token_mean, M = batch-wide unmasked targets) where ``count``
    is the number of pack members passing through the predicted token.
    """
    members = list(pack)
    unknown = [tid for tid in members if tid not in trie.trajectories]
    if unknown:
        raise KeyError(f"trajectories {unknown} are not in the trie")
    denom = normalizer(trie, normalization, n_total_trajectories)

    count: dict[int, int] = {}
    for tid in members:
        for nid in trie.path(tid):
            count[nid] = count.get(nid, 0) + 1

    tokens: list[int] = []
    parent: list[int] = []
    depth: list[int] = []
    segment: list[int] = []
    targets: list[LossTarget] = []
    last_pos: dict[int, int] = {}
    # node ids are a sorted preorder, so sorting the induced set flattens depth-first
    for nid in sorted(count):
        node = trie.nodes[nid]
        prev = last_pos[node.parent] if node.parent is not None else -1
        for k, (tok, m) in enumerate(zip(node.tokens, node.mask_run)):
            pos = len(tokens)
            tokens.append(tok)
            parent.append(prev)
            depth.append(node.start_depth + k)
            segment.append(nid)
            if prev >= 0 and m and denom > 0:
                targets.append(LossTarget(prev, tok, count[nid] / denom))
            prev = pos
        last_pos[nid] = prev
    order = {tid: i for i, tid in enumerate(trie.traj_ids)}
    return EncodedPack(tuple(tokens), tuple(parent), tuple(depth), tuple(segment), tuple(targets),
                       tuple(sorted(members, key=order.__getitem__)))


def encode_plan(trie: Trie, packs: Iterable[Iterable[str]], normalization: str = "trajectory_mean",
                n_total_trajectories: int | None = None) -> list[EncodedPack]:
    return [encode_pack(trie, p, normalization, n_total_trajectories) for p in packs]


def attention_allowed(pack: EncodedPack, i: int) -> frozenset[int]:
    """Positions token ``i`` may attend to: itself and its ancestor chain."""
    if not 0 <= i < len(pack.tokens):
        raise IndexError(f"token index {i} out of range for pack of {len(pack.tokens)} tokens")
    out = {i}
    j = pack.parent[i]
    while j >= 0:
        out.add(j)
        j = pack.parent[j]
    return frozenset(out)


def dense_mask(pack: EncodedPack) -> np.ndarray:
    n = len(pack.tokens)
    mask = np.zeros((n, n), dtype=bool)
    for i in range(n):
        p = pack.parent[i]
        if p >= 0:
            mask[i] = mask[p]  # parent row already holds the ancestor chain
        mask[i, i] = True
    return mask


def with_uniform_weights(pack: EncodedPack, weight: float) -> EncodedPack:
    """Copy of ``pack`` with every target weight replaced, i.e. the tree scaler switched off."""
    return replace(pack, targets=tuple(replace(t, weight=weight) for t in pack.targets))
