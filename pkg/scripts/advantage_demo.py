"""How difficulty/entropy rescaling redistributes advantage mass across a batch."""

import argparse

import numpy as np

from triepack.advantage import AdvantageGroup, shape_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--groups", type=int, default=6)
    ap.add_argument("--size", type=int, default=8)
    ap.add_argument("--lam", type=float, default=0.5)
    ap.add_argument("--mu", type=float, default=0.3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    groups = []
    for i in range(args.groups):
        p = (i + 0.5) / args.groups  # spread task difficulty
        groups.append(AdvantageGroup(f"g{i}", (rng.random(args.size) < p).astype(float),
                                     rng.gamma(2.0, 0.5, args.size), args.lam, args.mu))
    print(f"{'group':<6}{'success':>8}{'D':>7}{'alpha':>7}{'|A| sum':>9}{'|A`| sum':>10}")
    for g, out in zip(groups, shape_batch(groups)):
        print(f"{g.group_id:<6}{np.mean(g.rewards):8.2f}{out.difficulty:7.2f}{out.alpha:7.2f}"
              f"{np.abs(out.base).sum():9.3f}{np.abs(out.shaped).sum():10.3f}")


if __name__ == "__main__":
    main()
