"""Most likely hidden states: joint MAP tree (max-product) and per-node posterior argmax."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroLikelihood
from .inference import scaled_passes
from .layout import compile_layout
from .model import HmtModel
from .tree import Tree, upward_order


@dataclass(frozen=True)
class BestScoreTable:
    delta_log: np.ndarray  # (|T|, N)
    argmax_children: dict  # interior node -> (N, n) best child tuple per parent state


@dataclass(frozen=True)
class DecodeResult:
    states: np.ndarray
    log_score: float


def best_scores(m: HmtModel, t: Tree, obs) -> BestScoreTable:
    """Log best scores, leaves first, with the maximizing child tuple stored per parent state.

    Ties among child tuples go to the lexicographically smallest tuple.
    """
    lay = compile_layout((t,))
    N = m.state_count
    logb = m.emission.log_likelihoods(np.asarray(obs))
    delta = np.empty_like(logb)
    delta[lay.leaves] = logb[lay.leaves]
    best = {}
    for g in lay.up_groups:
        n = g.branching
        with np.errstate(divide="ignore"):
            loga = np.log(m.tensor(n)).reshape(N, -1)
        # score[k, rho, tuple] = log a + sum_i delta[child_i, mu_i], tuples in C order
        child_sum = np.zeros((len(g.parents),) + (N,) * n)
        for i in range(n):
            shape = [len(g.parents)] + [1] * n
            shape[i + 1] = N
            child_sum = child_sum + delta[g.children[:, i]].reshape(shape)
        score = loga[None, :, :] + child_sum.reshape(len(g.parents), 1, -1)
        arg = np.argmax(score, axis=2)  # first maximum
        delta[g.parents] = logb[g.parents] + np.take_along_axis(score, arg[:, :, None], axis=2)[:, :, 0]
        tuples = np.stack(np.unravel_index(arg, (N,) * n), axis=-1)  # (k, N, n)
        for row, p in enumerate(g.parents):
            best[int(p)] = tuples[row]
    return BestScoreTable(delta, dict(sorted(best.items())))


def viterbi_decode(m: HmtModel, t: Tree, obs) -> DecodeResult:
    """Single most probable hidden-state tree, computed in log space.

    Raises
    ------
    AllZeroLikelihood
        When every assignment has probability zero.
    """
    table = best_scores(m, t, obs)
    delta = table.delta_log
    with np.errstate(divide="ignore"):
        root_score = delta[t.root] + np.log(m.pi)
    top = int(np.argmax(root_score))
    if not np.isfinite(root_score[top]):
        dead = [c for c in upward_order(t) if not np.isfinite(delta[c]).any()]
        raise AllZeroLikelihood(dead[0] if dead else t.root)
    states = np.empty(t.node_count, dtype=np.int64)
    states[t.root] = top
    stack = [t.root]
    while stack:
        c = stack.pop()
        if t.children[c]:
            for x, s in zip(t.children[c], table.argmax_children[c][states[c]]):
                states[x] = s
                stack.append(x)
    return DecodeResult(states, float(root_score[top]))


def log_joint(m: HmtModel, t: Tree, obs, states) -> float:
    """``log P(h = states, O)``, summed in log space."""
    states = np.asarray(states, dtype=np.int64)
    logb = m.emission.log_likelihoods(np.asarray(obs))
    with np.errstate(divide="ignore"):
        total = np.log(m.pi[states[t.root]]) + logb[np.arange(t.node_count), states].sum()
        for c in t.interior:
            ch = t.children[c]
            total += np.log(m.tensor(len(ch))[(states[c],) + tuple(states[list(ch)])])
    return float(total)


def posterior_decode(gamma: np.ndarray) -> np.ndarray:
    """Per-node argmax of the state posteriors; ties go to the lowest state id."""
    return np.argmax(np.asarray(gamma), axis=1)


def decode(m: HmtModel, t: Tree, obs, criterion: str = "map") -> DecodeResult:
    """Decode with ``criterion`` ``"map"`` or ``"posterior"``; the score is the log joint of the returned states."""
    if criterion == "map":
        return viterbi_decode(m, t, obs)
    if criterion == "posterior":
        states = posterior_decode(scaled_passes(m, t, obs).gamma)
        return DecodeResult(states, log_joint(m, t, obs, states))
    raise ValueError(f"unknown decoding criterion {criterion!r}")
