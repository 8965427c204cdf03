"""Command-line front end: bounds, sweeps, capacity-cost tables and simulations.

Exit codes: 0 success (infeasible bounds included), 1 usage error,
2 input-file error, 3 budget error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds
from .capacity import capacity_cost
from .core import BudgetError, DmcSpec, EnergyProcess, SpecError, make_energy_process, ENERGY_KINDS
from .sim import SimConfig, run_experiment

EXIT_USAGE, EXIT_INPUT, EXIT_BUDGET = 1, 2, 3

SWEEP_COLUMNS = ("eps", "second_moment", "n", "m", "a", "log_m", "eh_rate", "no_eh_rate",
                 "infeasible", "large_n", "threshold", "outage", "valid")
CAPACITY_COLUMNS = ("P", "capacity", "dispersion", "multiplier", "iterations", "infeasible")

CSV_HELP = f"""\
CSV schemas (comma-separated, '.' decimal, header row always written):
  sweep:          {','.join(SWEEP_COLUMNS)}
  capacity-cost:  {','.join(CAPACITY_COLUMNS)}
  simulate --csv: mode,n,m,M,eps,trials,outage_rate,outage_hw,error_rate,error_hw,bound
Numbers are written with 12 significant digits; booleans as 0/1.
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _prob(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return v


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, float):
        return format(v, ".12g")
    return v


def _json(obj) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, np.generic):
            return clean(v.item())
        return v
    return json.dumps(clean(obj), indent=2, sort_keys=True)


def write_csv(rows, columns, out):
    writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k, "")) for k in columns})


# ---------------------------------------------------------------------------
# energy / power flags
# ---------------------------------------------------------------------------

def _add_power(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--power", type=float, help="mean energy arrival P (linear)")
    g.add_argument("--power-db", type=float, help="mean energy arrival in dB, P = 10^(dB/10)")


def _add_energy(p, allow_a=True):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--second-moment", type=float, help="E[E^2] of the arrivals")
    g.add_argument("--variance", type=float, help="Var[E] of the arrivals")
    g.add_argument("--energy-kind", choices=ENERGY_KINDS, help="named arrival law")
    if allow_a:
        g.add_argument("--a", type=float, help="explicit concentration constant a")
    p.add_argument("--energy-params", type=float, nargs="*", default=[],
                   help="parameters for --energy-kind")


def _power(args) -> float:
    P = args.power if args.power is not None else bounds.db_to_linear(args.power_db)
    if not P > 0:
        raise UsageError("power must be positive")
    return P


def _energy(args, power):
    """EnergyProcess (or a bare second moment) from the flags, or None if --a was given."""
    if getattr(args, "a", None) is not None:
        return None
    if args.energy_kind is not None:
        return make_energy_process(args.energy_kind, power, args.energy_params)
    second = args.second_moment if args.second_moment is not None else args.variance + power**2
    if second < power**2 * (1 - 1e-12):
        raise UsageError("second moment must be at least P^2")
    return EnergyProcess.from_moments(power, second)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_bounds_awgn(args) -> int:
    P = _power(args)
    energy = _energy(args, P)
    if args.n < 3:
        raise UsageError("--n must be at least 3")
    report = bounds.awgn_report(args.n, args.eps, P, energy, args.a)
    d = report.to_dict()
    if energy is not None:
        d["extra"]["second_moment"] = energy.second_moment
    print(_json(d))
    return 0


def cmd_bounds_dmc(args) -> int:
    P = _power(args)
    spec = DmcSpec.load(args.channel)
    energy = _energy(args, P)
    if args.n < 3:
        raise UsageError("--n must be at least 3")
    cc = capacity_cost(spec, P)
    report = bounds.dmc_report(args.n, args.eps, spec, energy, cc.capacity, cc.dispersion, P)
    d = report.to_dict()
    d["extra"].update({"input_dist": cc.input_dist.tolist(), "multiplier": cc.multiplier,
                       "second_moment": energy.second_moment, "note": cc.note})
    print(_json(d))
    return 0


@dataclass
class SweepSpec:
    n_grid: list
    power: float
    eps: list
    second_moments: list
    output: str | None = None
    curves: tuple = ("eh_rate", "no_eh_rate")

    def __post_init__(self):
        if not self.n_grid:
            raise SpecError("empty n grid")
        if any(n < 3 for n in self.n_grid):
            raise SpecError("every n must be at least 3")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise SpecError("n grid must be strictly increasing")
        bad = set(self.curves) - {"eh_rate", "no_eh_rate"}
        if bad or not self.curves:
            raise SpecError(f"unknown curves {sorted(bad)}")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        if "n" in d:
            grid = [int(n) for n in d["n"]]
        elif "n_range" in d:
            r = d["n_range"]
            grid = sorted(set(np.rint(np.geomspace(r["start"], r["stop"], int(r["num"]))).astype(int).tolist()))
        else:
            raise SpecError("sweep needs 'n' or 'n_range'")
        if "power" in d:
            power = float(d["power"])
        elif "power_db" in d:
            power = bounds.db_to_linear(float(d["power_db"]))
        else:
            raise SpecError("sweep needs 'power' or 'power_db'")
        as_list = lambda v: [float(x) for x in (v if isinstance(v, list) else [v])]
        eps = as_list(d["eps"])
        if "second_moment" in d:
            seconds = as_list(d["second_moment"])
        elif "variance" in d:
            seconds = [v + power**2 for v in as_list(d["variance"])]
        else:
            raise SpecError("sweep needs 'second_moment' or 'variance'")
        curves = d.get("curves", ["eh_rate", "no_eh_rate"])
        curves = tuple([curves] if isinstance(curves, str) else curves)
        return cls(grid, power, eps, seconds, d.get("output"), curves)


def sweep_rows(spec: SweepSpec) -> list[dict]:
    """One row per (eps, second moment, n), in input order."""
    rows = []
    P = spec.power
    for eps in spec.eps:
        for second in spec.second_moments:
            a, _ = bounds.concentration_constant_awgn(second, P)
            for n in spec.n_grid:
                m = bounds.saving_phase_length(a, P, n)
                log_m = bounds.theorem1_log_m(n, eps, P)
                validity = bounds.theorem1_validity(n, eps, second, P)
                row = {"eps": eps, "second_moment": second, "n": n, "m": m, "a": a,
                       "log_m": log_m, "infeasible": log_m <= 0,
                       "large_n": validity["large_n"], "threshold": validity["threshold"],
                       "outage": validity["outage"], "valid": validity["overall"]}
                if "eh_rate" in spec.curves:
                    row["eh_rate"] = max(log_m, 0.0) / (n + m)
                if "no_eh_rate" in spec.curves:
                    row["no_eh_rate"] = bounds.no_eh_rate(n, eps, P).rate
                rows.append(row)
    return rows


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from None


def cmd_sweep(args) -> int:
    spec = SweepSpec.from_dict(_load_json(args.spec))
    out = args.output or spec.output
    columns = [c for c in SWEEP_COLUMNS if c not in ("eh_rate", "no_eh_rate") or c in spec.curves]
    rows = sweep_rows(spec)
    if out in (None, "-"):
        write_csv(rows, columns, sys.stdout)
    else:
        with open(out, "w", newline="") as fh:
            write_csv(rows, columns, fh)
    return 0


def capacity_rows(spec: DmcSpec, costs) -> list[dict]:
    rows = []
    cmin, cmax = float(spec.cost.min()), float(spec.cost.max())
    for P in costs:
        if not cmin <= P <= cmax:
            rows.append({"P": P, "infeasible": True})
            continue
        r = capacity_cost(spec, P)
        rows.append({"P": P, "capacity": r.capacity, "dispersion": r.dispersion,
                     "multiplier": r.multiplier, "iterations": r.iterations, "infeasible": False})
    return rows


def cmd_capacity_cost(args) -> int:
    spec = DmcSpec.load(args.channel)
    if args.costs:
        costs = args.costs
    else:
        start, stop, num = args.grid
        costs = np.linspace(start, stop, int(num)).tolist()
    rows = capacity_rows(spec, costs)
    if args.output in (None, "-"):
        write_csv(rows, CAPACITY_COLUMNS, sys.stdout)
    else:
        with open(args.output, "w", newline="") as fh:
            write_csv(rows, CAPACITY_COLUMNS, fh)
    return 0


def cmd_simulate(args) -> int:
    raw = _load_json(args.config)
    raw["seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    try:
        config = SimConfig.from_dict(raw, base_dir=Path(args.config).parent)
    except (KeyError, TypeError) as exc:
        raise SpecError(f"{args.config}: bad config ({exc})") from None
    report = run_experiment(config)
    print(report.to_json())
    if args.csv:
        report.append_csv(args.csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ehfbl", description=__doc__.splitlines()[0], epilog=CSV_HELP,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bounds", help="evaluate achievability bounds")
    bsub = b.add_subparsers(dest="channel_kind", required=True, parser_class=_Parser)

    aw = bsub.add_parser("awgn", help="AWGN EH bound (JSON report)")
    aw.add_argument("--n", type=int, required=True, help="transmission-phase length")
    aw.add_argument("--eps", type=_prob, required=True)
    _add_power(aw)
    _add_energy(aw)
    aw.set_defaults(func=cmd_bounds_awgn)

    dm = bsub.add_parser("dmc", help="DM-EH bound (JSON report)")
    dm.add_argument("--channel", required=True, help="matrix text file or JSON DmcSpec")
    dm.add_argument("--n", type=int, required=True)
    dm.add_argument("--eps", type=_prob, required=True)
    _add_power(dm)
    _add_energy(dm, allow_a=False)
    dm.set_defaults(func=cmd_bounds_dmc)

    sw = sub.add_parser("sweep", help="rate-vs-n curves to CSV", epilog=CSV_HELP,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    sw.add_argument("spec", help="JSON sweep spec")
    sw.add_argument("--output", help="CSV path ('-' for stdout); overrides the sweep file")
    sw.set_defaults(func=cmd_sweep)

    cc = sub.add_parser("capacity-cost", help="C(P), V(P) table to CSV", epilog=CSV_HELP,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    cc.add_argument("--channel", required=True)
    g = cc.add_mutually_exclusive_group(required=True)
    g.add_argument("--costs", type=float, nargs="+")
    g.add_argument("--grid", type=float, nargs=3, metavar=("START", "STOP", "NUM"))
    cc.add_argument("--output")
    cc.set_defaults(func=cmd_capacity_cost)

    si = sub.add_parser("simulate", help="Monte Carlo experiment (JSON report)", epilog=CSV_HELP,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    si.add_argument("config", help="JSON SimConfig")
    si.add_argument("--seed", type=int, required=True)
    si.add_argument("--workers", type=_positive_int)
    si.add_argument("--csv", help="append one summary row to this CSV")
    si.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ehfbl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"ehfbl: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (SpecError, OSError) as exc:
        print(f"ehfbl: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
