"""Capacity-cost function and dispersion of a DMC under an equality cost constraint.

The solver is Blahut-Arimoto with a cost tilt exp(-s c(x)). A root search on the
multiplier s hits E[c(X)] = P; where the cost jumps across a tie between two
maximisers, the answer is a mixture polished by a cost-preserving BA step.
Every result carries a duality gap certificate.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from .core import DmcSpec, SpecError

SIMPLEX_TOL = 1e-9
WARM_FLOOR = 1e-6


def _check_dist(spec: DmcSpec, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (spec.input_size,):
        raise SpecError("input distribution has the wrong length")
    if np.any(p < 0) or abs(p.sum() - 1) > SIMPLEX_TOL:
        raise SpecError("input distribution is not on the probability simplex")
    return p


def output_distribution(spec: DmcSpec, p) -> np.ndarray:
    return _check_dist(spec, p) @ spec.transition


def information_density_table(spec: DmcSpec, p) -> np.ndarray:
    """log(q(y|x) / p_Y(y)) for every (x, y).

    Entries with q(y|x) = 0 are -inf; they never carry probability. An entry
    with q(y|x) > 0 but p_Y(y) = 0 (only possible when p(x) = 0) is +inf.
    """
    q = spec.transition
    p_y = output_distribution(spec, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(q > 0, np.log(q) - np.log(p_y), -np.inf)


def _joint_and_density(spec, p):
    p = _check_dist(spec, p)
    dens = information_density_table(spec, p)
    joint = p[:, None] * spec.transition
    used = joint > 0
    return joint[used], dens[used]


def mutual_information(spec: DmcSpec, p) -> float:
    w, d = _joint_and_density(spec, p)
    return float(np.dot(w, d))


def info_density_variance(spec: DmcSpec, p) -> float:
    w, d = _joint_and_density(spec, p)
    mean = np.dot(w, d)
    # a density that is constant up to rounding has variance exactly 0
    if np.ptp(d) <= 1e-12 * max(1.0, abs(mean)):
        return 0.0
    return float(max(np.dot(w, (d - mean) ** 2), 0.0))


def _neg_entropies(q):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(q > 0, q * np.log(q), 0.0).sum(axis=1)


def _divergences(q, p, neg_h=None):
    """D(q(.|x) || p_Y) for every x, 0 log 0 = 0; +inf where q(.|x) needs an unused output."""
    if neg_h is None:
        neg_h = _neg_entropies(q)
    p_y = p @ q
    live = p_y > 0
    with np.errstate(divide="ignore"):
        d = neg_h - q @ np.where(live, np.log(p_y), 0.0)
    if not live.all():
        d[(q[:, ~live] > 0).any(axis=1)] = np.inf
    return d


@dataclass
class TiltedBAResult:
    input_dist: np.ndarray
    information: float
    cost: float
    iterations: int
    converged: bool
    multiplier: float
    upper: float  # max_x D(q(.|x) || p_Y) - s c(x), an upper bound on max_p I - s E[c]

    @property
    def gap(self) -> float:
        return self.upper - (self.information - self.multiplier * self.cost)


def blahut_arimoto_tilted(spec: DmcSpec, s: float, tol: float = 1e-12,
                          max_iter: int = 100_000, p0=None, callback=None,
                          gap_tol: float = 0.0) -> TiltedBAResult:
    """Fixed point of p'(x) ~ p(x) exp(D(q(.|x) || p_Y) - s c(x)).

    Maximises I(X;Y) - s E[c(X)]. Stops when the sup-norm change of p drops
    below `tol` (`converged` is then True) or, if `gap_tol` > 0, when the
    certified gap between `upper` and the current objective drops below it.
    Symbols with zero mass in `p0` stay at zero. `callback(p)` sees every iterate.
    """
    if not tol > 0 or max_iter < 1:
        raise SpecError("need tol > 0 and max_iter >= 1")
    q, c = spec.transition, spec.cost
    p = np.full(spec.input_size, 1 / spec.input_size) if p0 is None else _check_dist(spec, p0).copy()
    neg_h = _neg_entropies(q)
    converged = False
    it = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            tilted = _divergences(q, p, neg_h) - s * c
            if gap_tol > 0 and np.max(tilted) - np.dot(p[p > 0], tilted[p > 0]) < gap_tol:
                it -= 1
                break
            logits = np.where(p > 0, np.log(p) + tilted, -np.inf)
            logits -= logits.max()
            new = np.exp(logits)
            new /= new.sum()
            change = np.max(np.abs(new - p))
            p = new
            if callback is not None:
                callback(p)
            if change < tol:
                converged = True
                break
        tilted = _divergences(q, p, neg_h) - s * c
    cost = float(p @ c)
    info = mutual_information(spec, p)
    return TiltedBAResult(p, info, cost, it, converged, float(s), float(np.max(tilted)))


@dataclass
class CapacityCostResult:
    input_dist: np.ndarray
    capacity: float
    dispersion: float
    multiplier: float
    achieved_cost: float
    iterations: int
    target_cost: float
    duality_gap: float = 0.0  # certified: true C(P) lies in [capacity, capacity + gap]
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_dist"] = self.input_dist.tolist()
        return d


DISPERSION_NOTE = "dispersion taken at this maximizer; other maximizers were not searched"


def _dual_bound(d, c, P) -> float:
    """min over s of max_x d(x) + s (P - c(x)): an upper bound on C(P) for any input."""
    if not np.all(np.isfinite(d)):
        return math.inf
    slope = P - c
    up, down = slope > 0, slope < 0
    flat = d[slope == 0].max(initial=-math.inf)
    if not up.any() or not down.any():
        return math.inf
    # the piecewise-linear maximum is minimised where a rising line meets a falling one
    s = ((d[down][None, :] - d[up][:, None]) / (slope[up][:, None] - slope[down][None, :])).ravel()
    vals = (d[:, None] + slope[:, None] * s[None, :]).max(axis=0)
    return float(max(vals.min(), flat))


def _solve_multiplier(base, c, P, s0) -> float:
    """s with sum softmax(base - s c) c = P; `base` is -inf off the support."""
    live = np.isfinite(base)
    b, cc = base[live], c[live]

    def excess(s):
        z = b - s * cc
        w = np.exp(z - z.max())
        return float(w @ cc / w.sum()) - P

    lo, hi = s0 - 1.0, s0 + 1.0
    while excess(lo) < 0:
        lo -= 2 * (hi - lo)
    while excess(hi) > 0:
        hi += 2 * (hi - lo)
    return optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _constrained_ba(spec, P, p, s, tol, gap_tol, max_iter):
    """BA with the multiplier re-solved every step, so every iterate costs exactly P.

    Each step is the exact maximisation of the BA surrogate over the
    cost-P slice of the simplex, so I(X;Y) never decreases.
    """
    q, c = spec.transition, spec.cost
    neg_h = _neg_entropies(q)
    upper = math.inf
    it = 0
    with np.errstate(divide="ignore"):
        for it in range(1, max_iter + 1):
            d = _divergences(q, p, neg_h)
            upper = _dual_bound(d, c, P)
            if upper - np.dot(p[p > 0], d[p > 0]) < gap_tol:
                it -= 1
                break
            base = np.where(p > 0, np.log(p) + d, -np.inf)
            s = _solve_multiplier(base, c, P, s)
            logits = base - s * c
            new = np.exp(logits - logits.max())
            new /= new.sum()
            change = np.max(np.abs(new - p))
            p = new
            if change < tol:
                break
        upper = min(upper, _dual_bound(_divergences(q, p, neg_h), c, P))
    return p, s, it, upper


def capacity_cost(spec: DmcSpec, target_cost: float, tol: float = 1e-9,
                  ba_tol: float = 1e-12, max_iter: int = 100_000,
                  gap_tol: float = 1e-11, search_iter: int = 10_000) -> CapacityCostResult:
    """max I(X;Y) over p_X with E[c(X)] = target_cost, plus the dispersion there.

    The multiplier s is located by a bracketed root search on the cost of the
    tilted-BA maximiser; the multiplier is negative when the target exceeds
    the cost of the unconstrained maximizer. If the search ends without an
    exact-cost fixed point (the cost curve jumps across P, or BA is slow near
    a support change), the best mixture of iterates straddling P is refined by
    BA restricted to the cost-P slice. `duality_gap` certifies the result. At
    the cost endpoints the input is restricted to the min- or max-cost symbols.
    """
    P = float(target_cost)
    c = spec.cost
    cmin, cmax = float(c.min()), float(c.max())
    if not cmin <= P <= cmax:
        raise SpecError(f"cost {P} outside the achievable range [{cmin}, {cmax}]")

    total = 0
    evaluated: dict[float, TiltedBAResult] = {}

    def run(s):
        nonlocal total
        if s in evaluated:
            return evaluated[s]
        warm = None
        if evaluated:
            # warm start from the closest multiplier tried so far; the uniform
            # floor lets BA revive symbols that were dead at that multiplier
            warm = evaluated[min(evaluated, key=lambda t: abs(t - s))].input_dist
            warm = (1 - WARM_FLOOR) * warm + WARM_FLOOR / spec.input_size
        r = blahut_arimoto_tilted(spec, s, ba_tol, min(search_iter, max_iter), warm, gap_tol=gap_tol)
        total += r.iterations
        evaluated[s] = r
        return r

    def finish(p, s, gap):
        p = np.clip(p, 0, None)
        p /= p.sum()
        return CapacityCostResult(p, mutual_information(spec, p), info_density_variance(spec, p),
                                  float(s), float(p @ c), total, P, float(max(gap, 0.0)),
                                  DISPERSION_NOTE)

    def exact(r):
        return abs(r.cost - P) <= tol and r.gap < gap_tol

    if P in (cmin, cmax):
        support = (c == P).astype(float)
        r = blahut_arimoto_tilted(spec, 0.0, ba_tol, max_iter, support / support.sum(), gap_tol=gap_tol)
        total += r.iterations
        return finish(r.input_dist, math.inf if P == cmin else -math.inf, 0.0)

    r0 = run(0.0)
    if exact(r0):
        return finish(r0.input_dist, 0.0, r0.gap)

    # the cost of the tilted maximiser is non-increasing in s: widen until the
    # bracket straddles P, then search inside it
    direction = 1.0 if r0.cost > P else -1.0
    near, far = 0.0, None
    step = 1.0
    for _ in range(200):
        s = direction * step
        if (run(s).cost - P) * direction <= 0:
            far = s
            break
        near = s
        step *= 2
    if far is None:
        raise SpecError("could not bracket the cost multiplier")
    if exact(evaluated[far]):
        return finish(evaluated[far].input_dist, far, evaluated[far].gap)

    class _Stop(Exception):
        pass

    def residual(s):
        r = run(s)
        # an inner run that cannot close its gap means two maximisers nearly
        # tie here; the cost-slice refinement below handles that faster
        if exact(r) or r.gap >= gap_tol:
            raise _Stop(s)
        return r.cost - P

    try:
        optimize.brentq(residual, min(near, far), max(near, far), xtol=1e-7, rtol=1e-7)
    except _Stop as stop:
        s = stop.args[0]
        if exact(evaluated[s]):
            return finish(evaluated[s].input_dist, s, evaluated[s].gap)

    best = None
    for ra in (r for r in evaluated.values() if r.cost >= P):
        for rb in (r for r in evaluated.values() if r.cost <= P):
            theta = 1.0 if ra.cost == rb.cost else (P - rb.cost) / (ra.cost - rb.cost)
            p = theta * ra.input_dist + (1 - theta) * rb.input_dist
            value = mutual_information(spec, p)
            if best is None or value > best[0]:
                best = (value, p, theta * ra.multiplier + (1 - theta) * rb.multiplier)
    _, p, s = best
    p, s, it, upper = _constrained_ba(spec, P, p, s, ba_tol, gap_tol, max_iter)
    total += it
    return finish(p, s, upper - mutual_information(spec, p))


def capacity_cost_curve(spec: DmcSpec, costs, **kw) -> list[CapacityCostResult]:
    return [capacity_cost(spec, P, **kw) for P in costs]
