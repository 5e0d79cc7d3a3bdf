"""Shared models and random instance generators for the test suite."""

import numpy as np

from coupled_hmt.model import Categorical, Gaussian, HmtModel
from coupled_hmt.tree import build_tree

A, B = 0, 1  # symbol ids


def m1_tensor():
    a = np.zeros((2, 2, 2))
    a[0, 0, 0], a[0, 1, 1] = 0.9, 0.1
    a[1, 0, 0], a[1, 1, 1] = 0.1, 0.9
    return a


def m1_categorical():
    """Perfectly coupled two-state model; state 0 always shows A, state 1 always B."""
    return HmtModel([0.5, 0.5], {2: m1_tensor()}, Categorical(np.eye(2))).check()


def m1_gaussian():
    return HmtModel([0.5, 0.5], {2: m1_tensor()}, Gaussian([0.0, 4.0], [1.0, 1.0])).check()


def cycle_tensor():
    """Deterministic cycle 0 -> 1 -> 2 -> 0, both children copying the successor state."""
    c = np.zeros((3, 3, 3))
    c[0, 1, 1] = c[1, 2, 2] = c[2, 0, 0] = 1.0
    return c


def cycle_gaussian(pi=(0.5, 0.25, 0.25)):
    """States 0 and 1 share an emission law; only state 2 is distinguishable."""
    return HmtModel(list(pi), {2: cycle_tensor()}, Gaussian([0.0, 0.0, 4.0], [1.0, 1.0, 1.0])).check()


def random_parents(rng, size, branching=(1, 2, 3)):
    """Random parent list on ``size`` nodes, each interior node having a child count from ``branching``."""
    parents = [None]
    frontier = [0]
    while len(parents) < size:
        p = frontier.pop(int(rng.integers(len(frontier)))) if frontier else int(rng.integers(len(parents)))
        k = int(rng.choice(branching))
        k = min(k, size - len(parents))
        if k not in branching:
            # a truncated brood would use a branching factor outside the allowed set
            k = min(branching)
            if len(parents) + k > size:
                break
        for _ in range(k):
            frontier.append(len(parents))
            parents.append(p)
    return parents


def random_model(rng, N, branchings, categorical, symbols=3, concentration=1.0):
    pi = rng.dirichlet(np.full(N, concentration))
    trans = {n: rng.dirichlet(np.full(N**n, concentration), size=N).reshape((N,) * (n + 1)) for n in branchings}
    if categorical:
        em = Categorical(rng.dirichlet(np.full(symbols, concentration), size=N))
    else:
        em = Gaussian(rng.normal(0.0, 2.0, size=N), rng.uniform(0.5, 2.0, size=N))
    return HmtModel(pi, trans, em).check()


def random_instance(rng, max_nodes=9, min_nodes=1, states=(2, 3), branching=(1, 2, 3), categorical=None):
    """``(model, tree, obs)`` with a random small tree and a random valid coupled model."""
    size = int(rng.integers(min_nodes, max_nodes + 1))
    t = build_tree(random_parents(rng, size, branching))
    N = int(rng.choice(states))
    if categorical is None:
        categorical = bool(rng.integers(2))
    m = random_model(rng, N, sorted(t.branching_factors()) or [2], categorical)
    obs = rng.integers(0, 3, size=t.node_count) if categorical else rng.normal(0.0, 2.0, size=t.node_count)
    return m, t, obs
