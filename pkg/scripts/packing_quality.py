"""Heuristic planner vs exhaustive optimum across budgets and DP widths."""

import argparse

import numpy as np

from triepack.planner import brute_force_plan, plan_packs, validate_plan
from triepack.synthetic import random_trajectories
from triepack.trie import build_trie, trie_stats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tries", type=int, default=300)
    ap.add_argument("--max-traj", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    ratios = {1: [], 4: [], 12: []}
    for _ in range(args.tries):
        trajs = random_trajectories(rng, V=int(rng.integers(2, 8)), n=int(rng.integers(2, args.max_traj + 1)))
        trie = build_trie(trajs)
        lo = max(len(t) for t in trajs)
        budget = int(rng.integers(lo, trie_stats(trie)["unique_tokens"] + 1))
        best = brute_force_plan(trie, budget)
        for width in ratios:
            plan = plan_packs(trie, budget, dp_width=width)
            assert validate_plan(plan, trie).ok
            ratios[width].append(plan.total_cost / best.total_cost)
    for width, r in ratios.items():
        r = np.array(r)
        print(f"dp_width={width:<3} mean ratio {r.mean():.4f}  worst {r.max():.4f}  optimal in {np.mean(r == 1):.0%}")


if __name__ == "__main__":
    main()
