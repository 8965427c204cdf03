"""Seeded Monte Carlo of save-and-transmit: arrivals, clipped encoding, channel, decoding.

Every trial t draws from generators keyed by (seed, t, stream), so a report
does not depend on how trials are split across workers.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import bounds
from .capacity import capacity_cost, information_density_table, info_density_variance, mutual_information
from .core import (AwgnEhConfig, BudgetError, DmcSpec, EnergyProcess, SpecError, TrialOutcome,
                   _as_rng, trial_rng)

MODES = ("outage_only", "surrogate_error", "exact_decode")
CSV_COLUMNS = ("mode", "n", "m", "M", "eps", "trials", "outage_rate", "outage_hw",
               "error_rate", "error_hw", "bound")
Z95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class DmcScenario:
    """DM-EH scenario; `input_dist` is the cost-P codeword distribution."""

    spec: DmcSpec
    energy: EnergyProcess
    n: int
    m: int
    eps: float
    input_dist: np.ndarray

    @classmethod
    def create(cls, spec: DmcSpec, energy: EnergyProcess, n: int, eps: float,
               m: int | None = None, input_dist=None) -> "DmcScenario":
        power = energy.mean
        if not power > 0:
            raise SpecError("mean energy must be positive")
        if input_dist is None:
            input_dist = capacity_cost(spec, power).input_dist
        input_dist = np.asarray(input_dist, dtype=float)
        if abs(input_dist @ spec.cost - power) > 1e-6:
            raise SpecError("input distribution must have expected cost equal to the mean energy")
        if m is None:
            m = bounds.saving_phase_length(bounds.concentration_constant_dmc(energy, spec), power, n)
        return cls(spec, energy, int(n), int(m), float(eps), input_dist)

    @property
    def power(self) -> float:
        return self.energy.mean

    @property
    def a(self) -> float:
        return bounds.concentration_constant_dmc(self.energy, self.spec)

    def to_dict(self) -> dict:
        return {"type": "dmc", "channel": self.spec.to_dict(), "energy": self.energy.to_dict(),
                "n": self.n, "m": self.m, "eps": self.eps,
                "input_dist": self.input_dist.tolist()}


def _is_dmc(scenario) -> bool:
    return isinstance(scenario, DmcScenario)


def density_moments(scenario) -> tuple[float, float]:
    """Mean and variance of the single-letter information density under the codebook law."""
    if _is_dmc(scenario):
        return (mutual_information(scenario.spec, scenario.input_dist),
                info_density_variance(scenario.spec, scenario.input_dist))
    P = scenario.power
    return bounds.awgn_capacity(P), P / (1 + P)


# ---------------------------------------------------------------------------
# pipeline pieces
# ---------------------------------------------------------------------------

def draw_intended_codeword(scenario, seed, count: int | None = None) -> np.ndarray:
    """Transmission-phase part of the intended codeword(s); the m saving slots are idle.

    Returns shape (n,) or (count, n).
    """
    rng = _as_rng(seed)
    shape = scenario.n if count is None else (count, scenario.n)
    if _is_dmc(scenario):
        return rng.choice(scenario.spec.input_size, size=shape, p=scenario.input_dist)
    return rng.normal(0.0, math.sqrt(scenario.power), size=shape)


def idle_symbol(scenario=None, cost=None):
    if cost is None and _is_dmc(scenario):
        cost = scenario.spec.cost
    if cost is None:
        return 0.0
    return int(np.flatnonzero(np.asarray(cost) == 0)[0])


def with_saving_prefix(intended, m: int, idle=0):
    intended = np.asarray(intended)
    return np.concatenate([np.full(m, idle, dtype=intended.dtype), intended])


def symbol_energy(symbols, cost=None) -> np.ndarray:
    symbols = np.asarray(symbols)
    if cost is None:
        return symbols.astype(float) ** 2
    return np.asarray(cost, dtype=float)[symbols]


def clip_to_energy(intended, arrivals, cost=None) -> np.ndarray:
    """Send each intended symbol if the battery covers it, else the idle symbol.

    `cost=None` means real symbols with energy x^2 (idle 0); otherwise symbols
    index `cost` and the idle symbol is the first zero-cost one. The battery is
    tracked in cumulative form so the output satisfies
    sum_{l<=k} energy(out_l) <= sum_{l<=k} arrivals_l for every k, exactly as
    computed in floating point.
    """
    intended = np.asarray(intended)
    arrivals = np.asarray(arrivals, dtype=float)
    if intended.shape != arrivals.shape or intended.ndim != 1:
        raise SpecError("intended and arrivals must be 1-D of equal length")
    energy = symbol_energy(intended, cost)
    cum_e = np.cumsum(arrivals)
    cum_x = np.cumsum(energy)
    bad = np.flatnonzero(cum_x > cum_e)
    out = intended.copy()
    if bad.size == 0:
        return out
    k = bad[0]
    idle = idle_symbol(cost=cost)
    spent = cum_x[k - 1] if k > 0 else 0.0
    for j in range(k, len(out)):
        if spent + energy[j] <= cum_e[j]:
            spent = spent + energy[j]
        else:
            out[j] = idle
    return out


def detect_outage(intended, arrivals, m: int | None = None, cost=None) -> bool:
    """True iff some prefix of the transmission phase outspends the shifted arrivals."""
    intended = np.asarray(intended)
    arrivals = np.asarray(arrivals, dtype=float)
    if m is None:
        m = arrivals.size - intended.size
    if m < 0 or arrivals.size != intended.size + m:
        raise SpecError("arrivals must cover the saving and transmission phases")
    full = with_saving_prefix(symbol_energy(intended, cost), m, 0.0)
    return bool(np.any(np.cumsum(full) > np.cumsum(arrivals)))


def channel_transmit(actual, scenario, seed) -> np.ndarray:
    """AWGN: add standard normal noise. DMC: inverse-CDF sampling of each row.

    Both use one uniform/normal draw per symbol, so two inputs sent with the
    same seed see coupled noise.
    """
    rng = _as_rng(seed)
    actual = np.asarray(actual)
    if _is_dmc(scenario):
        cdf = np.cumsum(scenario.spec.transition, axis=1)
        u = rng.random(actual.shape)
        y = (cdf[actual] <= u[..., None]).sum(axis=-1)
        return np.minimum(y, scenario.spec.output_size - 1)
    return actual + rng.standard_normal(actual.shape)


def info_density_terms(intended, received, scenario) -> np.ndarray:
    """Per-symbol log(q(y|x) / p_Y(y)); broadcasts over leading codebook axes."""
    x = np.asarray(intended)
    y = np.asarray(received)
    if _is_dmc(scenario):
        table = information_density_table(scenario.spec, scenario.input_dist)
        return table[x, y]
    P = scenario.power
    return 0.5 * math.log1p(P) + y**2 / (2 * (1 + P)) - (y - x) ** 2 / 2


def info_density_sum(intended, received_tail, scenario) -> float | np.ndarray:
    x = np.asarray(intended)
    y = np.asarray(received_tail)
    if x.shape[-1] != y.shape[-1]:
        raise SpecError("intended and received sequences differ in length")
    return info_density_terms(x, y, scenario).sum(axis=-1)


def threshold_decode(densities, log_m: float, n: int, rng: np.random.Generator) -> int:
    """Unique index whose density beats log M + n^(1/4); uniform guess otherwise."""
    above = np.flatnonzero(np.asarray(densities) > log_m + n**0.25)
    if above.size == 1:
        return int(above[0])
    return int(rng.integers(len(densities)))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    scenario: object  # AwgnEhConfig or DmcScenario
    trials: int
    seed: int
    mode: str = "outage_only"
    max_codebook: int = 1024
    M: int | None = None
    budget: int = 10_000_000  # cap on n*M symbols scored per trial
    workers: int = 1
    distinct_codewords: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpecError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.trials < 1:
            raise SpecError("trials must be positive")
        if self.seed < 0:
            raise SpecError("seed must be nonnegative")
        if self.M is not None and self.M < 1:
            raise SpecError("M must be positive")
        if self.mode == "exact_decode":
            if self.M is None:
                raise SpecError("exact_decode needs an explicit codebook size M")
            if self.M > self.max_codebook:
                raise BudgetError(f"M={self.M} exceeds max_codebook={self.max_codebook}")
            if self.M * self.scenario.n > self.budget:
                raise BudgetError(f"n*M={self.M * self.scenario.n} exceeds budget {self.budget}")

    def log_m(self) -> float:
        if self.M is not None:
            return math.log(self.M)
        mean, var = density_moments(self.scenario)
        return bounds.codebook_log_size(self.scenario.n, self.scenario.eps, mean, var)

    def to_dict(self) -> dict:
        sc = self.scenario
        scd = sc.to_dict() if _is_dmc(sc) else {"type": "awgn", **sc.to_dict()}
        return {"scenario": scd, "trials": self.trials, "seed": self.seed, "mode": self.mode,
                "max_codebook": self.max_codebook, "M": self.M, "budget": self.budget,
                "workers": self.workers, "distinct_codewords": self.distinct_codewords}

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "SimConfig":
        sc = d["scenario"]
        kind = sc.get("type", "awgn")
        energy = EnergyProcess.from_dict(sc["energy"])
        if kind == "awgn":
            scenario = AwgnEhConfig.create(sc["n"], sc["eps"], energy, sc.get("lambda"),
                                           sc.get("a"), sc.get("m"))
        elif kind == "dmc":
            if "channel_file" in sc:
                path = Path(sc["channel_file"])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                spec = DmcSpec.load(path)
            else:
                spec = DmcSpec.from_dict(sc["channel"])
            scenario = DmcScenario.create(spec, energy, sc["n"], sc["eps"], sc.get("m"),
                                          sc.get("input_dist"))
        else:
            raise SpecError(f"unknown scenario type {kind!r}")
        known = {"trials", "seed", "mode", "max_codebook", "M", "budget", "workers",
                 "distinct_codewords"}
        return cls(scenario, **{k: v for k, v in d.items() if k in known})


def _codebook(config: SimConfig, t: int) -> np.ndarray:
    sc = config.scenario
    rng = trial_rng(config.seed, t, "codebook")
    book = draw_intended_codeword(sc, rng, config.M)
    if config.distinct_codewords:
        for _ in range(10_000):
            _, first = np.unique(book, axis=0, return_index=True)
            dup = np.setdiff1d(np.arange(len(book)), first)
            if dup.size == 0:
                break
            book[dup] = draw_intended_codeword(sc, rng, dup.size)
        else:
            raise SpecError("could not draw distinct codewords")
    return book


def run_trial(config: SimConfig, t: int, log_m: float | None = None) -> TrialOutcome:
    """One pass through the pipeline.

    `info_density_sum` scores the intended codeword against the output it would
    have produced without clipping (same noise draw); `decode_error` is only
    meaningful in exact_decode mode.
    """
    sc = config.scenario
    n, m = sc.n, sc.m
    cost = sc.spec.cost if _is_dmc(sc) else None
    arrivals = sc.energy.sample(m + n, trial_rng(config.seed, t, "arrivals"))

    if config.mode == "exact_decode":
        book = _codebook(config, t)
        w = int(trial_rng(config.seed, t, "message").integers(config.M))
        intended = book[w]
    else:
        intended = draw_intended_codeword(sc, trial_rng(config.seed, t, "codebook"))
    outage = detect_outage(intended, arrivals, m, cost)
    if config.mode == "outage_only":
        return TrialOutcome(outage, False, math.nan)

    noise_seed = trial_rng(config.seed, t, "noise")
    ideal_out = channel_transmit(intended, sc, noise_seed)
    density = float(info_density_sum(intended, ideal_out, sc))
    if config.mode == "surrogate_error":
        return TrialOutcome(outage, False, density)

    if outage:
        actual = clip_to_energy(with_saving_prefix(intended, m, idle_symbol(sc)), arrivals, cost)[m:]
        received = channel_transmit(actual, sc, trial_rng(config.seed, t, "noise"))
    else:
        received = ideal_out
    with np.errstate(invalid="ignore"):
        scores = info_density_sum(book, received, sc)
    if log_m is None:
        log_m = config.log_m()
    decoded = threshold_decode(scores, log_m, n, trial_rng(config.seed, t, "fallback"))
    return TrialOutcome(outage, decoded != w, density)


def _run_chunk(config: SimConfig, start: int, stop: int, log_m: float):
    outs = [run_trial(config, t, log_m) for t in range(start, stop)]
    return (np.array([o.outage for o in outs], dtype=bool),
            np.array([o.decode_error for o in outs], dtype=bool),
            np.array([o.info_density_sum for o in outs], dtype=float))


def run_trials(config: SimConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(outage, decode_error, info_density_sum) arrays in trial order."""
    log_m = config.log_m() if config.mode != "outage_only" else math.nan
    workers = max(1, int(config.workers))
    if workers == 1:
        return _run_chunk(config, 0, config.trials, log_m)
    edges = np.linspace(0, config.trials, 4 * workers + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [config] * len(spans), [a for a, _ in spans],
                              [b for _, b in spans], [log_m] * len(spans)))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def half_width(rate: float, trials: int) -> float:
    """95% normal-approximation half-width, floored at 1/trials."""
    return max(Z95 * math.sqrt(rate * (1 - rate) / trials), 1.0 / trials)


@dataclass
class SimReport:
    mode: str
    n: int
    m: int
    M: object  # int, or None when only log M is meaningful
    log_m: float
    eps: float
    trials: int
    outage_rate: float
    outage_hw: float
    lemma1_bound_value: float
    error_rate: float = math.nan
    error_hw: float = math.nan
    threshold_rate: float = math.nan
    threshold_hw: float = math.nan
    union_term: float = math.nan
    surrogate_total: float = math.nan
    surrogate_hw: float = math.nan
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self) -> dict:
        d = {"bound": self.lemma1_bound_value}
        for col in CSV_COLUMNS:
            if col != "bound":
                d[col] = getattr(self, col)
        if d["M"] is None:
            d["M"] = f"exp({self.log_m!r})"
        return {k: _fmt(d[k]) for k in CSV_COLUMNS}

    def append_csv(self, path) -> None:
        path = Path(path)
        new = not path.exists() or path.stat().st_size == 0
        with path.open("a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            if new:
                writer.writeheader()
            writer.writerow(self.csv_row())


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".12g")
    return v


def _lemma_bound(sc) -> float:
    if sc.n < 3:
        return math.nan
    if _is_dmc(sc):
        return bounds.lemma1_bound(sc.m, sc.n, sc.a, sc.power, "dmc").value
    return bounds.lemma1_bound(sc.m, sc.n, sc.a, sc.power, "awgn", sc.lam).value


def _report(config: SimConfig, outage, error, density) -> SimReport:
    sc = config.scenario
    N = config.trials
    o_rate = float(outage.mean())
    rep = SimReport(config.mode, sc.n, sc.m, config.M, math.nan, sc.eps, N,
                    o_rate, half_width(o_rate, N), _lemma_bound(sc))
    if config.mode == "outage_only":
        return rep
    log_m = config.log_m()
    rep.log_m = log_m
    if not log_m > -math.inf:
        rep.extra["infeasible"] = "codebook size rule gives M = 0"
    thr = float(np.mean(density <= log_m + sc.n**0.25))
    rep.threshold_rate = thr
    rep.threshold_hw = half_width(thr, N)
    rep.union_term = math.exp(-sc.n**0.25)
    rep.surrogate_total = thr + rep.union_term + o_rate
    rep.surrogate_hw = math.hypot(rep.threshold_hw, rep.outage_hw)
    mean, var = density_moments(sc)
    rep.extra.update({"density_mean": mean, "density_variance": var,
                      "chebyshev_level": sc.eps / (2 + sc.eps)})
    if config.mode == "surrogate_error":
        rep.error_rate, rep.error_hw = rep.surrogate_total, rep.surrogate_hw
    else:
        e_rate = float(error.mean())
        rep.error_rate, rep.error_hw = e_rate, half_width(e_rate, N)
    return rep


def _run(config: SimConfig, mode: str) -> SimReport:
    if config.mode != mode:
        raise SpecError(f"config mode is {config.mode!r}, expected {mode!r}")
    return _report(config, *run_trials(config))


def run_outage_experiment(config: SimConfig) -> SimReport:
    return _run(config, "outage_only")


def run_surrogate_error_experiment(config: SimConfig) -> SimReport:
    """Threshold-miss rate + e^(-n^(1/4)) + outage rate, each estimated or exact."""
    return _run(config, "surrogate_error")


def run_exact_decode_experiment(config: SimConfig) -> SimReport:
    return _run(config, "exact_decode")


def run_experiment(config: SimConfig) -> SimReport:
    return _report(config, *run_trials(config))
