"""Small channels shared by the capacity and acceptance tests."""
import numpy as np

from ehfbl.core import DmcSpec, bsc, identity_channel


def useless(k=3, seed=0):
    row = np.random.default_rng(seed).dirichlet(np.ones(4))
    return DmcSpec(np.tile(row, (k, 1)), np.array([0.0, 0.5, 1.3][:k]))


def random3(seed, alpha=1.0):
    q = np.random.default_rng(seed).dirichlet(alpha * np.ones(3), size=3)
    return DmcSpec(q, np.array([0.0, 1.0, 2.0]))


def z_channel():
    return DmcSpec(np.array([[1.0, 0.0], [0.3, 0.7]]), np.array([0.0, 1.0]))


FIXTURES = {
    "bsc": bsc(0.1),
    "identity2": identity_channel(2),
    "identity3": identity_channel(3, [0.0, 1.0, 1.0]),
    "useless": useless(),
    "z": z_channel(),
    "random3a": random3(0),
    "random3b": random3(1),
    "sparse3": random3(7, alpha=0.3),
}
