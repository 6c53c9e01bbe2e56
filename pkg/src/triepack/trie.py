"""Radix prefix tree over trajectories.

Edges are keyed on ``(token, loss_mask)`` pairs: two trajectories share a
node only when they agree on both, so every node carries a single mask run
and each trajectory is reconstructed bit-exactly. Node ids follow a
depth-first preorder with children sorted by first ``(token, mask)``, which
makes the whole structure independent of insertion order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from triepack.trajectory import Trajectory


@dataclass(frozen=True)
class TrieNode:
    node_id: int
    tokens: tuple[int, ...]
    mask_run: tuple[int, ...]
    parent: int | None
    children: tuple[int, ...]
    leaf_ids: tuple[str, ...]
    leaf_count: int
    start_depth: int

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def key(self) -> tuple[int, int]:
        return (self.tokens[0], self.mask_run[0])


class Trie:
    """Immutable prefix forest. Build with :func:`build_trie`."""

    def __init__(self, nodes: Sequence[TrieNode], roots: Sequence[int],
                 trajectories: Sequence[Trajectory]):
        self.nodes = tuple(nodes)
        self.roots = tuple(roots)
        self.trajectories = {t.traj_id: t for t in trajectories}
        self.n_trajectories = len(self.trajectories)
        self.terminal: dict[str, int] = {}
        for node in self.nodes:
            for tid in node.leaf_ids:
                self.terminal[tid] = node.node_id
        self._paths: dict[str, tuple[int, ...]] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def traj_ids(self) -> list[str]:
        """Trajectory ids in depth-first terminal order."""
        return [tid for node in self.nodes for tid in node.leaf_ids]

    def path(self, traj_id: str) -> tuple[int, ...]:
        """Node ids from root to the trajectory's terminal node."""
        if traj_id not in self._paths:
            out = []
            node: int | None = self.terminal[traj_id]
            while node is not None:
                out.append(node)
                node = self.nodes[node].parent
            self._paths[traj_id] = tuple(reversed(out))
        return self._paths[traj_id]

    def reconstruct(self, traj_id: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
        tokens: list[int] = []
        mask: list[int] = []
        for nid in self.path(traj_id):
            tokens.extend(self.nodes[nid].tokens)
            mask.extend(self.nodes[nid].mask_run)
        return tuple(tokens), tuple(mask)

    def induced_nodes(self, traj_ids: Iterable[str]) -> list[int]:
        """Sorted node ids of the union of root->terminal paths."""
        seen: set[int] = set()
        for tid in traj_ids:
            seen.update(self.path(tid))
        return sorted(seen)

    def induced_cost(self, traj_ids: Iterable[str], below: int | None = None) -> int:
        """Token count of the induced subtree, optionally only nodes at or below depth of ``below``."""
        nodes = self.induced_nodes(traj_ids)
        if below is None:
            return sum(len(self.nodes[n]) for n in nodes)
        floor = self.nodes[below].start_depth
        return sum(len(self.nodes[n]) for n in nodes if self.nodes[n].start_depth >= floor)

    def canonical(self) -> list[tuple]:
        """Depth-first serialization, children by first (token, mask), fixed field order."""
        out: list[tuple] = []

        def walk(nid: int, level: int) -> None:
            n = self.nodes[nid]
            out.append((level, n.tokens, n.mask_run, tuple(sorted(n.leaf_ids)), n.leaf_count, n.start_depth))
            for c in sorted(n.children, key=lambda c: self.nodes[c].key):
                walk(c, level + 1)

        for r in sorted(self.roots, key=lambda r: self.nodes[r].key):
            walk(r, 0)
        return out


def build_trie(trajectories: Sequence[Trajectory]) -> Trie:
    if not trajectories:
        raise ValueError("build_trie needs at least one trajectory")
    ids = [t.traj_id for t in trajectories]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ValueError(f"duplicate traj_id {dup!r}")

    # uncompressed token-level trie
    kids: list[dict[tuple[int, int], int]] = [{}]  # slot 0 is a virtual super-root
    ends: list[list[str]] = [[]]
    for traj in trajectories:
        cur = 0
        for key in zip(traj.tokens, traj.loss_mask):
            nxt = kids[cur].get(key)
            if nxt is None:
                nxt = len(kids)
                kids[cur][key] = nxt
                kids.append({})
                ends.append([])
            cur = nxt
        ends[cur].append(traj.traj_id)

    nodes: list[dict] = []
    roots: list[int] = []
    # (raw node, key, parent node id, start depth); stack popped in sorted order
    stack = [(kids[0][k], k, None, 0) for k in sorted(kids[0], reverse=True)]
    while stack:
        raw, key, parent, depth = stack.pop()
        tokens, mask = [key[0]], [key[1]]
        while len(kids[raw]) == 1 and not ends[raw]:
            (key, raw), = kids[raw].items()
            tokens.append(key[0])
            mask.append(key[1])
        nid = len(nodes)
        nodes.append(dict(node_id=nid, tokens=tuple(tokens), mask_run=tuple(mask), parent=parent,
                          children=[], leaf_ids=tuple(sorted(ends[raw])), start_depth=depth))
        if parent is None:
            roots.append(nid)
        else:
            nodes[parent]["children"].append(nid)
        for k in sorted(kids[raw], reverse=True):
            stack.append((kids[raw][k], k, nid, depth + len(tokens)))

    counts = [len(n["leaf_ids"]) for n in nodes]
    for n in reversed(nodes):  # preorder => children after parents
        if n["parent"] is not None:
            counts[n["parent"]] += counts[n["node_id"]]
    frozen = [TrieNode(leaf_count=counts[n["node_id"]], **{**n, "children": tuple(n["children"])})
              for n in nodes]
    return Trie(frozen, roots, trajectories)


def trie_stats(trie: Trie) -> dict:
    unpacked = sum(len(t) for t in trie.trajectories.values())
    unique = sum(len(n) for n in trie.nodes)
    return {
        "unpacked_tokens": unpacked,
        "unique_tokens": unique,
        "sharing_ratio": unpacked / unique,
    }
