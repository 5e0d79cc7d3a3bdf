"""Sampling hidden-state trees and observations from a model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Categorical, HmtModel
from .tree import CATEGORICAL, SCALAR, Forest, Tree, full_tree


@dataclass(frozen=True)
class SimConfig:
    tree_count: int
    depth: int
    branching: int = 2
    seed: int = 0
    emit_hidden: bool = False

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be positive")
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.branching < 1:
            raise ValueError("branching must be positive")


def _draw(rng: np.random.Generator, cum_rows: np.ndarray) -> np.ndarray:
    """One categorical draw per row of cumulative probabilities."""
    u = rng.random(len(cum_rows))
    idx = (u[:, None] >= cum_rows).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


def sample_tree(m: HmtModel, t: Tree, rng: np.random.Generator) -> tuple:
    """Sample ``(hidden_states, observations)`` on the nodes of ``t``.

    Each interior node draws its children's whole state tuple in one
    categorical draw over the ``N ** n`` tuples, so coupling between siblings
    is preserved.
    """
    N = m.state_count
    states = np.empty(t.node_count, dtype=np.int64)
    states[t.root] = _draw(rng, np.cumsum(m.pi)[None, :])[0]
    frontier = [t.root]
    while frontier:
        by_n: dict = {}
        for c in frontier:
            if t.children[c]:
                by_n.setdefault(len(t.children[c]), []).append(c)
        frontier = []
        for n, parents in sorted(by_n.items()):
            cum = np.cumsum(m.tensor(n).reshape(N, -1), axis=1)
            tuples = _draw(rng, cum[states[parents]])
            digits = np.stack(np.unravel_index(tuples, (N,) * n), axis=1)
            for p, row in zip(parents, digits):
                for x, s in zip(t.children[p], row):
                    states[x] = s
                    frontier.append(x)
    em = m.emission
    if isinstance(em, Categorical):
        obs = _draw(rng, np.cumsum(em.probs, axis=1)[states])
    else:
        obs = rng.normal(em.mean[states], em.std[states])
    return states, obs


def sample_on_trees(m: HmtModel, trees: Sequence[Tree], seed: int) -> tuple:
    """Sample one observed forest on the given tree shapes; per-tree streams are spawned from ``seed``."""
    streams = np.random.SeedSequence(seed).spawn(len(trees))
    hidden, obs = [], []
    for t, ss in zip(trees, streams):
        h, o = sample_tree(m, t, np.random.default_rng(ss))
        hidden.append(h)
        obs.append(o)
    kind = CATEGORICAL if m.emission.kind == CATEGORICAL else SCALAR
    return Forest(tuple(trees), tuple(obs), kind), hidden


def sample_forest(m: HmtModel, config: SimConfig) -> tuple:
    """Sample ``config.tree_count`` full trees with ``config.depth`` levels.

    Returns
    -------
    forest : Forest
    hidden : list of ndarray
        Hidden states per tree, aligned with the nodes.
    """
    m.tensor(config.branching)
    t = full_tree(config.depth, config.branching)
    return sample_on_trees(m, [t] * config.tree_count, config.seed)
