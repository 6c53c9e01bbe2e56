"""Packed vs unpacked gradient check over the randomized suite.

    python scripts/equivalence_sweep.py --seeds 200 --numeric
"""

import argparse
import time

import numpy as np

from triepack.planner import plan_packs
from triepack.synthetic import random_case
from triepack.trie import build_trie, trie_stats
from triepack.verifier import grad_check, init_model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--numeric", action="store_true", help="also run central differences")
    args = ap.parse_args()

    rows = []
    start = time.perf_counter()
    for seed in range(args.seeds):
        case = random_case(seed)
        trie = build_trie(case.trajectories)
        plan = plan_packs(trie, case.budget)
        model = init_model(seed, case.V, case.d)
        good = grad_check(model, case.trajectories, plan, case.normalization)
        bad = grad_check(model, case.trajectories, plan, case.normalization, sabotage=True)
        num = (grad_check(model, case.trajectories, plan, case.normalization, mode="numeric").max_rel_grad_err
               if args.numeric else np.nan)
        rows.append((good.loss_rel_err, good.max_rel_grad_err, bad.max_rel_grad_err, num,
                     trie_stats(trie)["sharing_ratio"], len(plan.packs)))
    rows = np.array(rows)
    print(f"{args.seeds} cases in {time.perf_counter() - start:.1f}s")
    names = ["loss rel err", "analytic grad rel err", "sabotaged grad rel err", "numeric grad rel err",
             "sharing ratio", "packs"]
    for name, col in zip(names, rows.T):
        if np.isnan(col).all():
            continue
        print(f"  {name:<24} min {np.nanmin(col):9.2e}  median {np.nanmedian(col):9.2e}  max {np.nanmax(col):9.2e}")


if __name__ == "__main__":
    main()
