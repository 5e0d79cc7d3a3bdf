"""Brute-force enumeration over every hidden-state assignment of a tree.

Only usable on small trees; this is the reference against which the dynamic
programming recursions are checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .model import HmtModel
from .tree import Tree

DEFAULT_BUDGET = 10**7
_CHUNK = 1 << 15


@dataclass(frozen=True)
class EnumerationResult:
    likelihood: float
    map_assignment: np.ndarray
    map_score: float  # joint probability of the MAP assignment (linear scale)
    gamma_oracle: np.ndarray  # (|T|, N)
    xi_oracle: dict  # interior node -> (N,) * (n + 1)

    @property
    def log_likelihood(self) -> float:
        return float(np.log(self.likelihood)) if self.likelihood > 0 else -np.inf

    @property
    def map_log_score(self) -> float:
        return float(np.log(self.map_score)) if self.map_score > 0 else -np.inf


def joint_probability(m: HmtModel, t: Tree, obs, states) -> float:
    """``P(h = states, O)``: root prior times every emission times every transition entry."""
    states = [int(s) for s in states]
    b = m.emission.likelihoods(np.asarray(obs))
    p = float(m.pi[states[t.root]])
    for c in range(t.node_count):
        p *= float(b[c, states[c]])
    for c in t.interior:
        ch = t.children[c]
        p *= float(m.tensor(len(ch))[(states[c],) + tuple(states[x] for x in ch)])
    return p


def _assignments(N: int, T: int, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop`` of the lexicographic list of all assignments (node 0 most significant)."""
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(idx), T), dtype=np.int64)
    for c in range(T - 1, -1, -1):
        out[:, c] = idx % N
        idx //= N
    return out


def enumerate_tree(m: HmtModel, t: Tree, obs, node_budget: int = DEFAULT_BUDGET) -> EnumerationResult:
    """Sum, maximize and marginalize the joint over all ``N ** |T|`` assignments."""
    N, T = m.state_count, t.node_count
    total = N**T
    if total > node_budget:
        raise BudgetExceeded(f"{N}^{T} = {total} assignments exceeds budget {node_budget}")
    b = m.emission.likelihoods(np.asarray(obs))
    interior = [(c, t.children[c], m.tensor(len(t.children[c]))) for c in t.interior]

    likelihood = 0.0
    best, best_idx = -1.0, 0
    gamma = np.zeros((T, N))
    xi = {c: np.zeros(a.shape) for c, _, a in interior}
    for start in range(0, total, _CHUNK):
        h = _assignments(N, T, start, min(total, start + _CHUNK))
        w = m.pi[h[:, t.root]].copy()
        for c in range(T):
            w *= b[c, h[:, c]]
        for c, ch, a in interior:
            w *= a[(h[:, c],) + tuple(h[:, x] for x in ch)]
        likelihood += w.sum()
        k = int(np.argmax(w))  # first maximum = lexicographically smallest
        if w[k] > best:
            best, best_idx = float(w[k]), start + k
        for c in range(T):
            gamma[c] += np.bincount(h[:, c], weights=w, minlength=N)
        for c, ch, a in interior:
            flat = np.ravel_multi_index((h[:, c],) + tuple(h[:, x] for x in ch), a.shape)
            xi[c] += np.bincount(flat, weights=w, minlength=a.size).reshape(a.shape)
    if likelihood > 0:
        gamma /= likelihood
        for c in xi:
            xi[c] /= likelihood
    return EnumerationResult(
        likelihood=float(likelihood),
        map_assignment=_assignments(N, T, best_idx, best_idx + 1)[0],
        map_score=best,
        gamma_oracle=gamma,
        xi_oracle=xi,
    )


def subtree_posteriors(m: HmtModel, t: Tree, obs, node_budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """``P(h(C) = rho | O(subtree of C))`` for every node, each by its own enumeration."""
    from .tree import build_tree

    N = m.state_count
    out = np.zeros((t.node_count, N))
    obs = np.asarray(obs)
    for c in range(t.node_count):
        nodes = [c]
        i = 0
        while i < len(nodes):
            nodes.extend(t.children[nodes[i]])
            i += 1
        local = {g: k for k, g in enumerate(nodes)}
        sub = build_tree([None] + [local[t.parent[g]] for g in nodes[1:]])
        # the subtree root takes its prior marginal as root distribution
        prior = _prior_marginal(m, t, c)
        sub_model = m.replace(pi=prior)
        res = enumerate_tree(sub_model, sub, obs[nodes], node_budget)
        out[c] = res.gamma_oracle[0]
    return out


def _prior_marginal(m: HmtModel, t: Tree, c: int) -> np.ndarray:
    """Prior marginal of node ``c`` by summing over the states along its root path."""
    path = [c]
    while t.parent[path[-1]] is not None:
        path.append(t.parent[path[-1]])
    dist = m.pi.copy()
    for parent, child in zip(path[::-1][:-1], path[::-1][1:]):
        a = m.tensor(len(t.children[parent]))
        i = t.children[parent].index(child)
        axes = tuple(ax for ax in range(1, a.ndim) if ax != i + 1)
        dist = dist @ a.sum(axis=axes)
    return dist
