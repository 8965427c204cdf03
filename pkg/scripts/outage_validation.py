"""Empirical outage of the save-and-transmit encoder against the union bound.

For each n the saving phase is the default length; a second run with a
shortened saving phase shows where outage actually starts.
"""
import argparse

from ehfbl.core import AwgnEhConfig, make_energy_process
from ehfbl.sim import SimConfig, run_outage_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[200, 500, 2000])
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--kind", default="exponential")
    ap.add_argument("--fractions", type=float, nargs="+", default=[1.0, 0.1, 0.03, 0.01],
                    help="saving-phase length as a fraction of the default")
    args = ap.parse_args()
    energy = make_energy_process(args.kind, 1.0)
    print(f"{'n':>6} {'m':>6} {'outage':>9} {'+-':>8} {'bound':>10}")
    for n in args.n:
        base = AwgnEhConfig.create(n, 0.5, energy)
        for frac in args.fractions:
            sc = AwgnEhConfig.create(n, 0.5, energy, m=int(round(frac * base.m)))
            rep = run_outage_experiment(SimConfig(sc, args.trials, seed=args.seed))
            print(f"{n:>6} {sc.m:>6} {rep.outage_rate:>9.5f} {rep.outage_hw:>8.5f} "
                  f"{rep.lemma1_bound_value:>10.3e}")


if __name__ == "__main__":
    main()
