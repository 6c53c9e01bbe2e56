import pytest
from hypothesis import given, settings, strategies as st

from triepack.errors import InfeasibleError, SizeError
from triepack.planner import PackPlan, brute_force_plan, plan_packs, validate_plan
from triepack.trajectory import Trajectory
from triepack.trie import build_trie, trie_stats
from strategies import trajectory_sets


def _set_partitions(items):
    # independent oracle: recursive enumeration
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[head]] + part
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1:]


def _oracle_min_cost(trajs, budget):
    def cost(group):
        prefixes = {(t.tokens[:k], t.loss_mask[:k]) for t in group for k in range(1, len(t) + 1)}
        return len(prefixes)

    best = None
    for part in _set_partitions(list(trajs)):
        costs = [cost(g) for g in part]
        if max(costs) <= budget and (best is None or sum(costs) < best):
            best = sum(costs)
    return best


def test_whole_trie_fits(trie3):
    plan = plan_packs(trie3, 8)
    assert len(plan.packs) == 1
    assert sorted(plan.packs[0]) == ["T1", "T2", "T3"]
    assert plan.total_cost == 5


def test_budget_four_splits(trie3, trie3_trajs):
    plan = plan_packs(trie3, 4)
    assert sorted(sorted(p) for p in plan.packs) == [["T1", "T2"], ["T3"]]
    assert dict(zip(map(tuple, map(sorted, plan.packs)), plan.cost_per_pack)) == {("T1", "T2"): 4, ("T3",): 2}
    assert plan.total_cost == 6 == _oracle_min_cost(trie3_trajs, 4)
    assert brute_force_plan(trie3, 4).total_cost == 6


def test_infeasible_budget(trie3):
    with pytest.raises(InfeasibleError) as err:
        plan_packs(trie3, 2)
    assert err.value.traj_id in ("T1", "T2")


def test_brute_force_trivial_cases(trie3):
    plan = brute_force_plan(trie3, 100)
    assert len(plan.packs) == 1 and plan.total_cost == trie_stats(trie3)["unique_tokens"]
    disjoint = build_trie([Trajectory("a", [1, 2, 3], [1] * 3), Trajectory("b", [4, 5, 6], [1] * 3)])
    plan = brute_force_plan(disjoint, 3)
    assert len(plan.packs) == 2 and plan.total_cost == 6


def test_brute_force_size_guard():
    trie = build_trie([Trajectory(f"t{i}", [i], [1]) for i in range(9)])
    with pytest.raises(SizeError):
        brute_force_plan(trie, 9)


def test_validate_catches_violations(trie3):
    plan = plan_packs(trie3, 4)
    assert validate_plan(plan, trie3).ok
    dup = PackPlan(plan.packs + (("T1",),), 4, plan.cost_per_pack + (3,), plan.total_cost + 3)
    report = validate_plan(dup, trie3)
    assert not report.ok and report.violation.startswith("partition")
    low = PackPlan(plan.packs, 4, tuple(c - 1 for c in plan.cost_per_pack), plan.total_cost - 2)
    report = validate_plan(low, trie3)
    assert not report.ok and report.violation.startswith("cost")
    missing = PackPlan(plan.packs[:1], 4, plan.cost_per_pack[:1], plan.cost_per_pack[0])
    assert not validate_plan(missing, trie3).ok


def test_greedy_path_used_when_dp_narrow():
    trajs = [Trajectory(f"t{i}", [0, i % 3, i], [1, 1, 1]) for i in range(8)]
    trie = build_trie(trajs)
    narrow = plan_packs(trie, 5, dp_width=1)
    assert validate_plan(narrow, trie).ok
    assert narrow.total_cost <= 1.15 * brute_force_plan(trie, 5).total_cost


@settings(max_examples=60, deadline=None)
@given(trajectory_sets(max_n=6), st.integers(0, 40), st.integers(1, 12))
def test_plan_valid_and_close_to_optimal(trajs, extra, width):
    trie = build_trie(trajs)
    budget = max(len(t) for t in trajs) + extra
    plan = plan_packs(trie, budget, dp_width=width)
    assert validate_plan(plan, trie).ok
    assert plan.total_cost <= sum(len(t) for t in trajs)
    best = brute_force_plan(trie, budget)
    assert validate_plan(best, trie).ok
    assert best.total_cost <= plan.total_cost <= 1.15 * best.total_cost
    assert plan == plan_packs(trie, budget, dp_width=width)


@settings(max_examples=25, deadline=None)
@given(trajectory_sets(max_n=5, alphabet=2), st.integers(0, 10))
def test_brute_force_matches_independent_oracle(trajs, extra):
    budget = max(len(t) for t in trajs) + extra
    assert brute_force_plan(build_trie(trajs), budget).total_cost == _oracle_min_cost(trajs, budget)
