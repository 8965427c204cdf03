"""Domain types: energy-arrival laws, channel descriptions, scenario configs.

All logarithms are natural; information is in nats.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

ENERGY_KINDS = ("constant", "exponential", "scaled-bernoulli", "two-point", "truncated-gaussian")

# stream tags keep codebook / arrivals / noise / fallback draws independent
STREAMS = {"codebook": 0, "arrivals": 1, "noise": 2, "fallback": 3, "message": 4}

ROW_SUM_TOL = 1e-12


class SpecError(ValueError):
    """Invalid parameters or malformed input files."""


class BudgetError(RuntimeError):
    """A simulation request exceeds its configured compute budget."""


def trial_rng(seed: int, trial: int, stream: str) -> np.random.Generator:
    """Counter-based generator for one (seed, trial, stream) triple."""
    if seed < 0 or trial < 0:
        raise SpecError("seed and trial index must be nonnegative")
    ss = np.random.SeedSequence([int(seed), int(trial), STREAMS[stream]])
    return np.random.Generator(np.random.Philox(ss))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


# ---------------------------------------------------------------------------
# energy arrivals
# ---------------------------------------------------------------------------

def _truncnorm_moments(mu: float, sigma: float) -> tuple[float, float]:
    alpha = -mu / sigma
    tail = stats.norm.sf(alpha)
    ratio = stats.norm.pdf(alpha) / tail
    mean = mu + sigma * ratio
    var = sigma**2 * (1.0 + alpha * ratio - ratio**2)
    return mean, var + mean**2


@functools.lru_cache(maxsize=64)
def _truncnorm_location(mean: float, sigma: float) -> float:
    """Pre-truncation location giving the requested truncated mean."""
    f = lambda mu: _truncnorm_moments(mu, sigma)[0] - mean
    lo, hi = mean - sigma, mean + sigma
    while f(lo) > 0:
        lo -= 2.0 * (hi - lo)
    while f(hi) < 0:
        hi += 2.0 * (hi - lo)
    return optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15)


@dataclass(frozen=True)
class EnergyProcess:
    """I.i.d. nonnegative energy arrivals with mean P and second moment E[E^2].

    params by kind:
      constant, exponential: ()
      scaled-bernoulli: (q,) -- level mean/q with probability q, else 0
      two-point: (low, high) -- probability of `high` fixed by the mean
      truncated-gaussian: (sigma,) -- Normal(mu, sigma^2) conditioned on >= 0,
        mu solved so the truncated mean equals `mean`
    """

    kind: str
    mean: float
    second_moment: float
    params: tuple = ()

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if count < 1:
            raise SpecError("count must be at least 1")
        return _draw(self, count, rng)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mean": self.mean,
                "second_moment": self.second_moment, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyProcess":
        proc = make_energy_process(d["kind"], d["mean"], d.get("params", ()))
        if "second_moment" in d and not math.isclose(proc.second_moment, d["second_moment"],
                                                     rel_tol=1e-9, abs_tol=1e-12):
            raise SpecError("second_moment inconsistent with kind/params")
        return proc

    @classmethod
    def from_moments(cls, mean: float, second_moment: float) -> "EnergyProcess":
        """Simplest law with the given two moments (constant or scaled-bernoulli)."""
        if second_moment < mean**2 * (1 - 1e-12):
            raise SpecError("second moment below mean^2")
        if mean == 0 or second_moment <= mean**2:
            return make_energy_process("constant", mean)
        return make_energy_process("scaled-bernoulli", mean, (mean**2 / second_moment,))


def make_energy_process(kind: str, mean: float, params=()) -> EnergyProcess:
    params = tuple(float(p) for p in params)
    mean = float(mean)
    if kind not in ENERGY_KINDS:
        raise SpecError(f"unknown energy law {kind!r}")
    if not mean >= 0:
        raise SpecError("mean must be nonnegative")

    if kind == "constant":
        _nparams(kind, params, 0)
        second = mean**2
    elif kind == "exponential":
        _nparams(kind, params, 0)
        second = 2.0 * mean**2
    elif kind == "scaled-bernoulli":
        _nparams(kind, params, 1)
        (q,) = params
        if not 0 < q <= 1:
            raise SpecError("scaled-bernoulli probability must lie in (0, 1]")
        second = mean**2 / q
    elif kind == "two-point":
        _nparams(kind, params, 2)
        low, high = params
        if low < 0:
            raise SpecError("two-point support must be nonnegative")
        if not low < high or not low <= mean <= high:
            raise SpecError("two-point law needs low <= mean <= high, low < high")
        p_high = (mean - low) / (high - low)
        second = (1 - p_high) * low**2 + p_high * high**2
    else:
        _nparams(kind, params, 1)
        (sigma,) = params
        if not sigma > 0:
            raise SpecError("truncated-gaussian sigma must be positive")
        if mean == 0:
            raise SpecError("truncated-gaussian mean must be positive")
        mu = _truncnorm_location(mean, sigma)
        second = _truncnorm_moments(mu, sigma)[1]
    return EnergyProcess(kind, mean, float(second), params)


def _nparams(kind, params, k):
    if len(params) != k:
        raise SpecError(f"{kind} takes {k} parameter(s), got {len(params)}")


def _draw(proc: EnergyProcess, count: int, rng: np.random.Generator) -> np.ndarray:
    kind, mean = proc.kind, proc.mean
    if kind == "constant":
        return np.full(count, mean)
    if kind == "exponential":
        return mean * rng.standard_exponential(count)
    if kind == "scaled-bernoulli":
        (q,) = proc.params
        return np.where(rng.random(count) < q, mean / q, 0.0)
    if kind == "two-point":
        low, high = proc.params
        p_high = (mean - low) / (high - low)
        return np.where(rng.random(count) < p_high, high, low)
    (sigma,) = proc.params
    mu = _truncnorm_location(mean, sigma)
    return stats.truncnorm.rvs(-mu / sigma, np.inf, loc=mu, scale=sigma,
                               size=count, random_state=rng)


def sample_arrivals(proc: EnergyProcess, count: int, seed) -> np.ndarray:
    """`count` arrivals; `seed` is an int or a Generator."""
    return proc.sample(count, _as_rng(seed))


# ---------------------------------------------------------------------------
# AWGN scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AwgnEhConfig:
    n: int
    eps: float
    power: float
    energy: EnergyProcess
    lam: float
    a: float
    m: int

    @classmethod
    def create(cls, n: int, eps: float, energy: EnergyProcess,
               lam: float | None = None, a: float | None = None,
               m: int | None = None) -> "AwgnEhConfig":
        """Fill lambda, a and m with the save-and-transmit defaults."""
        from .bounds import concentration_constant_awgn, saving_phase_length

        power = energy.mean
        if not power > 0:
            raise SpecError("mean energy must be positive")
        if not 0 < eps < 1:
            raise SpecError("eps must lie in (0, 1)")
        a0, lam0 = concentration_constant_awgn(energy, power)
        a = a0 if a is None else float(a)
        lam = lam0 if lam is None else float(lam)
        if m is None:
            m = saving_phase_length(a, power, n)
        return cls(int(n), float(eps), float(power), energy, lam, a, int(m))

    @property
    def n_star(self) -> int:
        return self.n + self.m

    def to_dict(self) -> dict:
        return {"n": self.n, "eps": self.eps, "power": self.power,
                "energy": self.energy.to_dict(), "lambda": self.lam,
                "a": self.a, "m": self.m}

    @classmethod
    def from_dict(cls, d: dict) -> "AwgnEhConfig":
        energy = EnergyProcess.from_dict(d["energy"])
        if "power" in d and not math.isclose(d["power"], energy.mean, rel_tol=1e-12):
            raise SpecError("power must equal the mean energy arrival")
        return cls.create(d["n"], d["eps"], energy, d.get("lambda"), d.get("a"), d.get("m"))


# ---------------------------------------------------------------------------
# discrete memoryless channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DmcSpec:
    transition: np.ndarray
    cost: np.ndarray
    input_size: int = field(init=False)
    output_size: int = field(init=False)

    def __post_init__(self):
        q = np.array(self.transition, dtype=float)
        c = np.array(self.cost, dtype=float)
        if q.ndim != 2 or q.size == 0:
            raise SpecError("transition must be a nonempty 2-D matrix")
        if c.shape != (q.shape[0],):
            raise SpecError("cost must have one entry per input symbol")
        if np.any(q < 0) or np.any(q > 1):
            raise SpecError("transition entries must lie in [0, 1]")
        sums = q.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1) > ROW_SUM_TOL)
        if bad.size:
            raise SpecError(f"row {bad[0]} sums to {sums[bad[0]]!r}, not 1")
        if np.any(c < 0):
            raise SpecError("costs must be nonnegative")
        if not np.any(c == 0):
            raise SpecError("cost needs an idle symbol with zero cost")
        q.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "transition", q)
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "input_size", q.shape[0])
        object.__setattr__(self, "output_size", q.shape[1])

    @property
    def idle_symbol(self) -> int:
        return int(np.flatnonzero(self.cost == 0)[0])

    def __eq__(self, other):
        return (isinstance(other, DmcSpec)
                and np.array_equal(self.transition, other.transition)
                and np.array_equal(self.cost, other.cost))

    def to_dict(self) -> dict:
        return {"input_size": self.input_size, "output_size": self.output_size,
                "transition": self.transition.tolist(), "cost": self.cost.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DmcSpec":
        spec = cls(d["transition"], d["cost"])
        for key in ("input_size", "output_size"):
            if key in d and d[key] != getattr(spec, key):
                raise SpecError(f"{key} does not match the transition matrix")
        return spec

    @classmethod
    def from_text(cls, text: str) -> "DmcSpec":
        """Rows of whitespace-separated probabilities, then one cost line.

        Blank lines and lines starting with '#' are skipped.
        """
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split()])
            except ValueError:
                raise SpecError(f"line {lineno}: not a list of numbers") from None
        if len(rows) < 2:
            raise SpecError("need at least one matrix row and a cost line")
        *matrix, cost = rows
        widths = {len(r) for r in matrix}
        if len(widths) != 1:
            raise SpecError("matrix rows have different lengths")
        return cls(np.array(matrix), np.array(cost))

    @classmethod
    def load(cls, path) -> "DmcSpec":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            return cls.from_dict(json.loads(text))
        return cls.from_text(text)

    def to_text(self) -> str:
        lines = [" ".join(repr(float(v)) for v in row) for row in self.transition]
        lines.append(" ".join(repr(float(v)) for v in self.cost))
        return "\n".join(lines) + "\n"


def bsc(p: float, cost=(0.0, 1.0)) -> DmcSpec:
    return DmcSpec(np.array([[1 - p, p], [p, 1 - p]]), np.array(cost))


def identity_channel(k: int, cost=None) -> DmcSpec:
    cost = np.arange(k, dtype=float) if cost is None else cost
    return DmcSpec(np.eye(k), np.array(cost))


# ---------------------------------------------------------------------------
# Monte Carlo trial record
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialOutcome:
    outage: bool
    decode_error: bool
    info_density_sum: float


def dumps(obj) -> str:
    """Stable JSON for any of the types above (or plain dicts)."""
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    return json.dumps(obj, indent=2, sort_keys=True)
