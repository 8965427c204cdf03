"""Reference computations that share no code with the package."""
import math

import numpy as np


def binary_entropy(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def bsc_pairs(p, theta):
    """(probability, log q(y|x)/p_Y(y)) over the four (x, y) outcomes of a BSC(p)
    driven by Bern(theta)."""
    q = [[1 - p, p], [p, 1 - p]]
    px = [1 - theta, theta]
    py = [sum(px[x] * q[x][y] for x in range(2)) for y in range(2)]
    return [(px[x] * q[x][y], math.log(q[x][y] / py[y])) for x in range(2) for y in range(2)]


def simplex_grid_capacity(transition, cost, P, step=1e-3, band=1e-3):
    """Max of I(X;Y) over a step-spaced grid of 3-symbol inputs with |E[c] - P| <= band."""
    q = np.asarray(transition, dtype=float)
    c = np.asarray(cost, dtype=float)
    k = round(1 / step)
    i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    keep = i + j <= k
    grid = np.stack([i[keep], j[keep], k - i[keep] - j[keep]], axis=1) / k
    grid = grid[np.abs(grid @ c - P) <= band]
    py = grid @ q
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(q > 0, q * np.log(q), 0.0).sum(axis=1)
        h_y = -np.where(py > 0, py * np.log(py), 0.0).sum(axis=1)
    mi = h_y + grid @ cond
    best = int(np.argmax(mi))
    return float(mi[best]), grid[best]


def tilted_fourth_moment_is(power, lam, samples, seed, spread=4.0):
    """E[X^4 e^(lam X^2)], X ~ N(0, power), by importance sampling from N(0, spread*power).

    The wider proposal keeps the estimator variance finite up to lam < (1 + 1/spread)/(4 power).
    Returns (estimate, standard error).
    """
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, math.sqrt(spread * power), samples)
    expo = lam - 1 / (2 * power) + 1 / (2 * spread * power)
    vals = z**4 * math.sqrt(spread) * np.exp(expo * z**2)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))
