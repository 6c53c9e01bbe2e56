"""Split a trie into packs that fit a token budget.

The cost of a pack is the number of tokens in the subtree induced by its
trajectories, i.e. every shared run is materialized once. ``plan_packs``
walks the trie bottom-up; each node keeps a list of open bundles, and
bundles meeting at a node are merged either exactly (subset-partition DP,
when there are at most ``dp_width`` of them) or first-fit-decreasing.
``brute_force_plan`` enumerates every set partition and is used as the
oracle for small tries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from triepack.errors import InfeasibleError, SizeError
from triepack.trie import Trie

BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class PackPlan:
    packs: tuple[tuple[str, ...], ...]
    budget: int
    cost_per_pack: tuple[int, ...]
    total_cost: int

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "total_cost": self.total_cost,
            "cost_per_pack": list(self.cost_per_pack),
            "packs": [list(p) for p in self.packs],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PackPlan":
        return cls(tuple(tuple(p) for p in raw["packs"]), int(raw["budget"]),
                   tuple(int(c) for c in raw["cost_per_pack"]), int(raw["total_cost"]))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violation: str | None = None


def _check_budget(trie: Trie, budget: int) -> None:
    for tid in trie.traj_ids:
        n = len(trie.trajectories[tid])
        if n > budget:
            raise InfeasibleError(f"trajectory {tid!r} has {n} tokens, more than budget {budget}", tid)


def _make_plan(trie: Trie, groups: Sequence[Sequence[str]], budget: int) -> PackPlan:
    order = {tid: i for i, tid in enumerate(trie.traj_ids)}
    packs = [tuple(sorted(g, key=order.__getitem__)) for g in groups]
    packs.sort(key=lambda p: order[p[0]])
    costs = tuple(trie.induced_cost(p) for p in packs)
    return PackPlan(tuple(packs), budget, costs, sum(costs))


def _partition_dp(costs: list[int], feasible: list[bool], k: int) -> list[int]:
    """Exact min-cost partition of k items; ``costs``/``feasible`` indexed by subset bitmask.

    Minimizes (total cost, number of groups). Returns the chosen group masks.
    """
    full = (1 << k) - 1
    best: list[tuple[int, int] | None] = [None] * (full + 1)
    choice = [0] * (full + 1)
    best[0] = (0, 0)
    for mask in range(1, full + 1):
        low = mask & -mask
        rest = mask ^ low
        sub = rest
        top: tuple[int, int] | None = None
        pick = 0
        while True:
            group = sub | low
            prev = best[mask ^ group]
            if feasible[group] and prev is not None:
                cand = (prev[0] + costs[group], prev[1] + 1)
                if top is None or cand < top:
                    top, pick = cand, group
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[mask] = top
        choice[mask] = pick
    groups = []
    mask = full
    while mask:
        groups.append(choice[mask])
        mask ^= choice[mask]
    return groups


def _merge(trie: Trie, node: int, bundles: list[frozenset[str]], budget: int,
           dp_width: int) -> list[frozenset[str]]:
    limit = budget - trie.nodes[node].start_depth
    k = len(bundles)
    if k <= 1:
        return bundles
    if k <= dp_width:
        costs = [0] * (1 << k)
        feasible = [False] * (1 << k)
        for mask in range(1, 1 << k):
            members = frozenset().union(*(bundles[i] for i in range(k) if mask >> i & 1))
            costs[mask] = trie.induced_cost(members, below=node)
            feasible[mask] = costs[mask] <= limit
        groups = _partition_dp(costs, feasible, k)
        merged = [frozenset().union(*(bundles[i] for i in range(k) if g >> i & 1)) for g in groups]
    else:
        ranked = sorted(bundles, key=lambda b: (-trie.induced_cost(b, below=node), sorted(b)))
        merged = []
        for b in ranked:
            for j, g in enumerate(merged):
                if trie.induced_cost(g | b, below=node) <= limit:
                    merged[j] = g | b
                    break
            else:
                merged.append(b)
    return sorted(merged, key=sorted)


def _combine_across_roots(trie: Trie, groups: list[frozenset[str]], budget: int) -> list[frozenset[str]]:
    # disjoint roots share nothing, so this only lowers the pack count
    ranked = sorted(groups, key=lambda g: (-trie.induced_cost(g), sorted(g)))
    bins: list[tuple[frozenset[str], int]] = []
    for g in ranked:
        c = trie.induced_cost(g)
        for j, (b, bc) in enumerate(bins):
            if bc + c <= budget:
                bins[j] = (b | g, bc + c)
                break
        else:
            bins.append((g, c))
    return [b for b, _ in bins]


def plan_packs(trie: Trie, budget: int, dp_width: int = 12) -> PackPlan:
    """Bottom-up DP/greedy pack planning. Raises InfeasibleError if any trajectory exceeds the budget."""
    if dp_width < 1:
        raise ValueError("dp_width must be >= 1")
    _check_budget(trie, budget)
    open_bundles: dict[int, list[frozenset[str]]] = {}
    closed: list[frozenset[str]] = []
    for nid in reversed(range(len(trie.nodes))):  # preorder reversed: children first
        node = trie.nodes[nid]
        bundles = [frozenset([tid]) for tid in node.leaf_ids]
        for c in node.children:
            bundles.extend(open_bundles.pop(c))
        bundles = _merge(trie, nid, bundles, budget, dp_width)
        if node.parent is None:
            closed.extend(bundles)
        else:
            open_bundles[nid] = bundles
    return _make_plan(trie, _combine_across_roots(trie, closed, budget), budget)


def _set_partitions(n: int):
    """Restricted growth strings of length n, in lexicographic order."""
    rgs = [0] * n

    def rec(i: int, top: int):
        if i == n:
            yield tuple(rgs)
            return
        for b in range(top + 2):
            rgs[i] = b
            yield from rec(i + 1, max(top, b))

    if n == 0:
        yield ()
        return
    yield from rec(1, 0)


def brute_force_plan(trie: Trie, budget: int) -> PackPlan:
    """Exhaustive optimum over all set partitions: min total cost, then fewest packs."""
    ids = trie.traj_ids
    if len(ids) > BRUTE_FORCE_LIMIT:
        raise SizeError(f"brute force is limited to {BRUTE_FORCE_LIMIT} trajectories, got {len(ids)}")
    _check_budget(trie, budget)
    block_cost: dict[frozenset[str], int] = {}
    best_key = None
    best_groups = None
    for rgs in _set_partitions(len(ids)):
        groups: list[list[str]] = [[] for _ in range(max(rgs) + 1)]
        for tid, b in zip(ids, rgs):
            groups[b].append(tid)
        total = 0
        for g in groups:
            key = frozenset(g)
            if key not in block_cost:
                block_cost[key] = trie.induced_cost(key)
            if block_cost[key] > budget:
                break
            total += block_cost[key]
        else:
            cand = (total, len(groups), rgs)
            if best_key is None or cand < best_key:
                best_key, best_groups = cand, groups
    return _make_plan(trie, best_groups, budget)


def validate_plan(plan: PackPlan, trie: Trie) -> ValidationReport:
    """Check partition, budget and cost arithmetic; report the first violation."""
    seen: dict[str, int] = {}
    for i, pack in enumerate(plan.packs):
        if not pack:
            return ValidationReport(False, f"pack {i} is empty")
        for tid in pack:
            if tid not in trie.trajectories:
                return ValidationReport(False, f"pack {i} contains unknown trajectory {tid!r}")
            if tid in seen:
                return ValidationReport(False, f"partition: trajectory {tid!r} appears in packs {seen[tid]} and {i}")
            seen[tid] = i
    missing = sorted(set(trie.trajectories) - set(seen))
    if missing:
        return ValidationReport(False, f"partition: trajectories {missing} are not in any pack")
    if len(plan.cost_per_pack) != len(plan.packs):
        return ValidationReport(False, "cost: cost_per_pack length does not match pack count")
    for i, (pack, cost) in enumerate(zip(plan.packs, plan.cost_per_pack)):
        actual = trie.induced_cost(pack)
        if cost != actual:
            return ValidationReport(False, f"cost: pack {i} declares {cost} tokens, induced subtree has {actual}")
        if cost > plan.budget:
            return ValidationReport(False, f"budget: pack {i} costs {cost} > budget {plan.budget}")
    if plan.total_cost != sum(plan.cost_per_pack):
        return ValidationReport(False, f"cost: total_cost {plan.total_cost} != sum {sum(plan.cost_per_pack)}")
    return ValidationReport(True)
