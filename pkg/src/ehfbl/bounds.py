"""Closed-form achievability bounds for save-and-transmit over EH channels.

Everything is in nats. Bounds that come out negative are reported as
infeasible (rate 0), never raised, so sweeps can cross the feasibility edge.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .core import DmcSpec, EnergyProcess, SpecError

SQRT2_12 = 12.0 * math.sqrt(2.0)
E04 = math.exp(0.4)
PHI_INV_RANGE = (1e-8, 1 - 1e-8)


def _second_moment(energy) -> float:
    return energy.second_moment if isinstance(energy, EnergyProcess) else float(energy)


def _check_power(power):
    if power < 0:
        raise SpecError("power must be nonnegative")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def awgn_capacity(power: float) -> float:
    _check_power(power)
    return 0.5 * math.log1p(power)


def awgn_dispersion(power: float) -> float:
    _check_power(power)
    return power * (power + 2) / (2 * (power + 1) ** 2)


def gaussian_tilted_fourth_moment(power: float, lam: float) -> float:
    """E[X^4 exp(lam X^2)] for X ~ Normal(0, power)."""
    _check_power(power)
    if lam < 0 or 2 * lam * power >= 1:
        raise SpecError("need 0 <= lam < 1/(2 power); the integral diverges otherwise")
    return 3 * power**2 * (1 - 2 * lam * power) ** -2.5


def concentration_constant_awgn(energy, power: float) -> tuple[float, float]:
    """(a, lambda) for Gaussian codewords: lambda = 1/(4P), a = max{E[E^2], 12 sqrt2 P^2}."""
    if not power > 0:
        raise SpecError("power must be positive")
    if isinstance(energy, EnergyProcess) and not math.isclose(energy.mean, power, rel_tol=1e-12):
        raise SpecError(f"energy mean {energy.mean} differs from power {power}")
    lam = 1 / (4 * power)
    return max(_second_moment(energy), gaussian_tilted_fourth_moment(power, lam)), lam


def concentration_constant_dmc(energy, spec: DmcSpec) -> float:
    if isinstance(energy, EnergyProcess) and not energy.mean > 0:
        raise SpecError("mean energy must be positive")
    c = spec.cost
    return max(_second_moment(energy), float(np.max(c**2 * np.exp(c))))


def saving_phase_length(a: float, power: float, n: int) -> int:
    """Idle slots before transmission: ceil(6 sqrt(a n log n) / P)."""
    if n < 3:
        raise SpecError("saving-phase length needs n >= 3")
    if not (a > 0 and power > 0):
        raise SpecError("a and power must be positive")
    return math.ceil(6 * math.sqrt(a * n * math.log(n)) / power)


@dataclass(frozen=True)
class Lemma1Bound:
    value: float  # clamped to [0, 1]
    raw: float
    valid: bool


def lemma1_bound(m: int, n: int, a: float, power: float, rule: str = "awgn",
                 lam: float | None = None, tight_constant: bool = False) -> Lemma1Bound:
    """Union bound on Pr{some prefix of the codeword outspends the arrivals}.

    `rule` selects the large-n hypothesis: "awgn" needs
    n/log n >= max{a/P^2, 1/(a lam^2)} (lam defaults to 1/(4P)), "dmc" needs
    n/log n >= a/P^2. `tight_constant` swaps e^0.4 for e^(log n / n).
    """
    if n < 3:
        raise SpecError("lemma bound needs n >= 3")
    logn = math.log(n)
    const = math.exp(logn / n) if tight_constant else E04
    log_raw = math.log(const / logn) + 2 * logn - 0.5 * m * power * math.sqrt(logn / (a * n))
    raw = math.exp(log_raw) if log_raw < 700 else math.inf
    if rule == "awgn":
        lam = 1 / (4 * power) if lam is None else lam
        need = max(a / power**2, 1 / (a * lam**2))
    elif rule == "dmc":
        need = a / power**2
    else:
        raise SpecError(f"unknown validity rule {rule!r}")
    return Lemma1Bound(min(raw, 1.0), raw, n / logn >= need)


def exp_bounds(x):
    """(lower, upper) sandwich for e^x, x >= 0: 1+x <= e^x <= 1+x+x^2 e^x/2."""
    x = np.asarray(x, dtype=float)
    return 1 + x, 1 + x + x**2 * np.exp(x) / 2


def exp_neg_bounds(x):
    """(lower, upper) sandwich for e^-x, x >= 0: 1-x <= e^-x <= 1-x+x^2/2."""
    x = np.asarray(x, dtype=float)
    return 1 - x, 1 - x + x**2 / 2


def gamma_n(n: int, a: float) -> float:
    """Chernoff parameter squared: log n / (a n)."""
    return math.log(n) / (a * n)


def lemma1_chain(k: int, m: int, n: int, a: float, power: float, second_moment: float,
                 tilted_fourth, lam: float) -> dict:
    """Logs of the successive upper bounds on Pr{prefix k outspends m+k arrivals}.

    `tilted_fourth(t)` returns E[X^4 e^{t X^2}] for the codeword law. Keys
    follow the order of the argument: Taylor step, tilt replaced by lam,
    moments replaced by a, 1+u <= e^u, and the final e^{k a gamma - m P sqrt(gamma)/2}.
    Each stage dominates the previous one when the lemma's hypotheses hold.
    """
    g = gamma_n(n, a)
    r = math.sqrt(g)
    e_term = math.log(1 - r * power + g * second_moment / 2)
    e_term_a = math.log(1 - r * power + a * g / 2)
    return {
        "taylor": k * math.log(1 + r * power + g * tilted_fourth(r) / 2) + (m + k) * e_term,
        "tilt": k * math.log(1 + r * power + g * tilted_fourth(lam) / 2) + (m + k) * e_term,
        "moments": k * math.log(1 + r * power + a * g / 2) + (m + k) * e_term_a,
        "exponential": k * (r * power + a * g / 2) + (m + k) * (-r * power + a * g / 2),
        "final": k * a * g - m * power * r / 2,
    }


def lemma1_union_sum(m: int, n: int, a: float, power: float) -> float:
    """sum_k exp(k a gamma - m P sqrt(gamma)/2) before the geometric-series relaxation."""
    g = gamma_n(n, a)
    k = np.arange(1, n + 1)
    return float(np.exp(k * a * g - m * power * math.sqrt(g) / 2).sum())


def _chebyshev_penalty(n, eps, variance):
    return math.sqrt((2 + eps) * n * variance / eps)


def theorem1_log_m(n: int, eps: float, power: float) -> float:
    """Lower bound on log M over n transmission slots (after the saving phase)."""
    return (0.5 * n * math.log1p(power) - _chebyshev_penalty(n, eps, power / (power + 1))
            - n**0.25 - 1)


def _validity(n, eps, need_n_over_log_n) -> dict:
    logn = math.log(n)
    large = n / logn >= need_n_over_log_n
    threshold = n >= math.log((2 + eps) / eps**2) ** 4
    outage = n * logn >= E04 * (2 + eps) / eps
    return {"large_n": large, "threshold": threshold, "outage": outage,
            "overall": large and threshold and outage}


def theorem1_validity(n: int, eps: float, energy, power: float) -> dict:
    """Large-n hypotheses of the AWGN bound: moment, threshold and outage conditions."""
    return _validity(n, eps, max(_second_moment(energy) / power**2, SQRT2_12))


def dmc_validity(n: int, eps: float, a: float, power: float) -> dict:
    return _validity(n, eps, a / power**2)


def eh_rate(n: int, eps: float, power: float, a: float) -> float:
    """Save-and-transmit rate per channel use; 0 when the bound is negative."""
    m = saving_phase_length(a, power, n)
    return max(theorem1_log_m(n, eps, power), 0.0) / (n + m)


def theorem1_star_log_m(n_star: int, eps: float, power: float, a: float) -> float:
    """The bound restated purely in the total length n* = n + m."""
    if n_star < 4:
        raise SpecError("n_star must be at least 4")
    return sum(theorem1_star_components(n_star, eps, power, a).values())


def theorem1_star_components(n_star, eps, power, a) -> dict:
    c2 = math.log1p(power)
    return {
        "first_order": 0.5 * n_star * c2,
        "saving_phase": -3 * c2 * math.sqrt(a * n_star * math.log(n_star)) / power,
        "chebyshev": -_chebyshev_penalty(n_star, eps, power / (power + 1)),
        "threshold": -n_star**0.25,
        "constant": -0.5 * c2 - 1,
    }


def second_order_coefficient(power: float, a: float) -> float:
    """Coefficient of sqrt(n* log n*) in the n*-form bound."""
    return -3 * math.log1p(power) * math.sqrt(a) / power


def phi_inv(eps: float) -> float:
    lo, hi = PHI_INV_RANGE
    if not lo <= eps <= hi:
        raise SpecError(f"eps={eps} outside [{lo}, {hi}]")
    return -math.sqrt(2.0) * float(special.erfcinv(2.0 * eps))


def codebook_log_size(n: int, eps: float, mean: float, variance: float) -> float:
    """log M for the largest M with log M < n*mean - sqrt((2+eps) n var / eps) - n^(1/4) <= log(M+1).

    Returns -inf when that M is 0 (no usable codebook). Beyond exp(700) the
    gap between log M and the right-hand side is below float resolution.
    """
    rhs = n * mean - _chebyshev_penalty(n, eps, variance) - n**0.25
    if rhs > 700:
        return rhs
    size = math.ceil(math.exp(rhs)) - 1
    return math.log(size) if size >= 1 else -math.inf


@dataclass(frozen=True)
class NormalApproxReport:
    capacity: float
    dispersion: float
    rate: float


def no_eh_rate(n: int, eps: float, power: float) -> NormalApproxReport:
    """Normal approximation without EH constraints, O(1/n) term dropped."""
    if n < 1:
        raise SpecError("n must be positive")
    if not 0 < eps < 1:
        raise SpecError("eps must lie in (0, 1)")
    cap, disp = awgn_capacity(power), awgn_dispersion(power)
    rate = cap + math.sqrt(disp / n) * phi_inv(eps) + math.log(n) / (2 * n)
    return NormalApproxReport(cap, disp, rate)


def theorem2_components(n_star, eps, power, a, capacity, dispersion) -> dict:
    return {
        "first_order": n_star * capacity,
        "saving_phase": -6 * capacity * math.sqrt(a * n_star * math.log(n_star)) / power,
        "chebyshev": -_chebyshev_penalty(n_star, eps, dispersion),
        "threshold": -n_star**0.25,
        "constant": -capacity - 1,
    }


def theorem2_log_m(n_star: int, eps: float, spec: DmcSpec | None, power: float, a: float,
                   capacity: float, dispersion: float) -> float:
    """DM-EH lower bound on log M over n* total channel uses.

    `spec` is unused by the formula; it is accepted so callers can pass the
    channel the capacity/dispersion were computed for.
    """
    return sum(theorem2_components(n_star, eps, power, a, capacity, dispersion).values())


@dataclass
class BoundReport:
    log_m_lower: float
    rate_per_use: float
    validity: dict
    components: dict
    n: int
    m: int
    a: float
    feasible: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def awgn_report(n: int, eps: float, power: float, energy=None, a: float | None = None) -> BoundReport:
    """Bound, rate, validity flags and n*-form terms for one AWGN scenario.

    Give either an energy law / second moment or an explicit `a`.
    """
    if not 0 < eps < 1:
        raise SpecError("eps must lie in (0, 1)")
    if energy is None and a is None:
        raise SpecError("need an energy law, a second moment, or an explicit a")
    second = _second_moment(energy) if energy is not None else None
    lam = 1 / (4 * power)
    if a is None:
        a, lam = concentration_constant_awgn(energy, power)
    m = saving_phase_length(a, power, n)
    log_m = theorem1_log_m(n, eps, power)
    validity = (theorem1_validity(n, eps, second, power) if second is not None
                else _validity_from_a(n, eps, a, power))
    comps = theorem1_star_components(n + m, eps, power, a)
    return BoundReport(
        log_m_lower=log_m,
        rate_per_use=max(log_m, 0.0) / (n + m),
        validity=validity,
        components=comps,
        n=n, m=m, a=a,
        feasible=log_m > 0,
        extra={"lambda": lam, "n_star": n + m, "eps": eps, "power": power,
               "log_m_star": sum(comps.values()),
               "lemma1_bound": lemma1_bound(m, n, a, power, "awgn", lam).value,
               "second_order_coefficient": second_order_coefficient(power, a)},
    )


def _validity_from_a(n, eps, a, power):
    # only `a` is known: fall back on the lemma's own hypothesis
    lam = 1 / (4 * power)
    return _validity(n, eps, max(a / power**2, 1 / (a * lam**2)))


def dmc_report(n: int, eps: float, spec: DmcSpec, energy, capacity: float,
               dispersion: float, power: float | None = None) -> BoundReport:
    if isinstance(energy, EnergyProcess):
        power = energy.mean if power is None else power
    if power is None or not power > 0:
        raise SpecError("need a positive power")
    if not 0 < eps < 1:
        raise SpecError("eps must lie in (0, 1)")
    a = concentration_constant_dmc(energy, spec)
    m = saving_phase_length(a, power, n)
    comps = theorem2_components(n + m, eps, power, a, capacity, dispersion)
    log_m = sum(comps.values())
    return BoundReport(
        log_m_lower=log_m,
        rate_per_use=max(log_m, 0.0) / (n + m),
        validity=dmc_validity(n, eps, a, power),
        components=comps,
        n=n, m=m, a=a,
        feasible=log_m > 0,
        extra={"n_star": n + m, "eps": eps, "power": power, "capacity": capacity,
               "dispersion": dispersion,
               "lemma1_bound": lemma1_bound(m, n, a, power, "dmc").value},
    )
