"""Shared builders for the test suite."""

import numpy as np

from capot.instance import TransportInstance, _apportion
from capot.penalty import DualTriple


def saturated_2x2() -> TransportInstance:
    # f = g = (1/2, 1/2), every capacity 1/4: the only coupling is hbar itself
    return TransportInstance.from_units([2, 2], [2, 2], [[1, 1], [1, 1]], [[0.0, 1.0], [1.0, 0.0]], 4)


def loose_2x2() -> TransportInstance:
    # capacities 0.3 leave a one-parameter family of couplings
    return TransportInstance.from_units([5, 5], [5, 5], [[3, 3], [3, 3]], [[0.0, 1.0], [1.0, 0.0]], 10)


def forced_infeasible() -> TransportInstance:
    # all mass must go 0 -> 1 but that cell has no capacity
    return TransportInstance.from_units([1, 0], [0, 1], [[1, 0], [0, 1]], [[0.0, 0.0], [0.0, 0.0]], 1)


def random_mixed_instance(rng: np.random.Generator, m: int, n: int, denom: int = 60) -> TransportInstance:
    """Random instance that is feasible only some of the time.

    Capacities are a random multiple (0.6 to 2) of ``min(f_i, g_j)`` with some cells
    closed, so tight and violated subset conditions both show up.
    """
    f = _apportion(rng.exponential(size=m) + 0.05, denom)
    g = _apportion(rng.exponential(size=n) + 0.05, denom)
    scale = rng.uniform(0.6, 2.0, size=(m, n))
    hbar = np.floor(scale * np.minimum.outer(f, g)).astype(np.int64)
    hbar[rng.random((m, n)) < 0.1] = 0
    cost = rng.normal(size=(m, n))
    return TransportInstance.from_units(f, g, hbar, cost, denom)


def random_feasible_triple(rng: np.random.Generator, inst: TransportInstance, tight: bool = False) -> DualTriple:
    """A random point of the dual feasible set.

    ``w`` is pushed down to ``min(c + u + v, 0)`` and, unless ``tight``,
    lowered further by a random amount.
    """
    m, n = inst.shape
    scale = rng.choice([0.1, 1.0, 10.0])
    u = rng.normal(scale=scale, size=m)
    v = rng.normal(scale=scale, size=n)
    w = np.minimum(inst.cost + u[:, None] + v[None, :], 0.0)
    if not tight:
        w = w - rng.exponential(scale=scale, size=(m, n)) * (rng.random((m, n)) < 0.5)
    return DualTriple(u, v, w)


def random_box_plan(rng: np.random.Generator, inst: TransportInstance) -> np.ndarray:
    """Random plan in ``0 <= h <= hbar`` with some cells pinned to the bounds."""
    h = rng.random(inst.shape) * inst.hbar
    pick = rng.random(inst.shape)
    h[pick < 0.15] = 0.0
    h[pick > 0.85] = inst.hbar[pick > 0.85]
    return h
