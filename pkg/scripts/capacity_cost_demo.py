"""Capacity-cost and dispersion curves for a BSC and a random 3-input channel."""
import argparse

import numpy as np

from ehfbl.capacity import capacity_cost
from ehfbl.core import DmcSpec, bsc


def table(spec, costs, label):
    print(f"\n{label}")
    print(f"{'P':>6} {'C(P)':>12} {'V(P)':>12} {'s':>10} {'gap':>9}")
    for P in costs:
        r = capacity_cost(spec, P)
        print(f"{P:>6.3f} {r.capacity:>12.8f} {r.dispersion:>12.8f} {r.multiplier:>10.4f} "
              f"{r.duality_gap:>9.1e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0, help="seed for the random channel")
    ap.add_argument("--points", type=int, default=11)
    args = ap.parse_args()
    table(bsc(0.1), np.linspace(0, 1, args.points), "BSC(0.1), cost (0, 1)")
    q = np.random.default_rng(args.seed).dirichlet(np.ones(3), size=3)
    table(DmcSpec(q, np.array([0.0, 1.0, 2.0])), np.linspace(0, 2, args.points),
          f"random 3x3 (seed {args.seed}), cost (0, 1, 2)")


if __name__ == "__main__":
    main()
