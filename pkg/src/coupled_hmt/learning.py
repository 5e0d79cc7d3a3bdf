"""Expectation-maximization for coupled-branch hidden Markov trees.

The E-step is the scaled downward/upward sweep over the whole forest. The
M-step re-estimates

* each transition tensor from the summed joint posteriors of (parent state,
  child state tuple), normalized by the sum of those same quantities;
* emissions from the state posteriors (symbol frequencies for categorical
  data, weighted moments for Gaussian data);
* the root distribution as the mean root posterior across trees.

Parameters whose posterior mass is zero keep their previous values.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DegenerateData, LikelihoodDecreased, NonFiniteParameter, ZeroStateOccupancy
from .inference import ForestStats, forest_estep
from .model import Categorical, Gaussian, HmtModel, required_branching, validate
from .tree import CATEGORICAL, Forest

log = logging.getLogger(__name__)

DEFAULT_STD_FLOOR = 1e-6
MONOTONE_SLACK = 1e-8


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 500
    log_likelihood_tolerance: float = 1e-6
    seed: int = 0
    init: Union[str, HmtModel] = "kmeans"
    std_floor: float = DEFAULT_STD_FLOOR

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.log_likelihood_tolerance > 0:
            raise ValueError("log_likelihood_tolerance must be positive")


@dataclass
class FitTrace:
    """Models and total log-likelihoods, starting with the initial model at iteration 0."""

    models: list = field(default_factory=list)
    log_likelihoods: list = field(default_factory=list)
    reason: str = ""

    @property
    def model(self) -> HmtModel:
        return self.models[-1]

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihoods[-1]

    @property
    def iterations(self) -> int:
        return len(self.models) - 1


# ---------------------------------------------------------------------------
# M-step pieces


def m_step_transitions(xi_sums: dict, previous: dict) -> dict:
    """Row-normalize summed joint posteriors into new transition tensors.

    ``xi_sums[n]`` is the sum over interior nodes with ``n`` children of their
    joint posterior tensors. Rows without mass, and branching factors absent
    from ``xi_sums``, are copied from ``previous``.
    """
    out = {}
    for n, old in previous.items():
        if n not in xi_sums:
            out[n] = np.array(old)
            continue
        N = old.shape[0]
        counts = np.asarray(xi_sums[n], dtype=np.float64).reshape(N, -1)
        totals = counts.sum(axis=1)
        rows = np.array(old, dtype=np.float64).reshape(N, -1)
        live = totals > 0
        rows[live] = counts[live] / totals[live, None]
        out[n] = rows.reshape(old.shape)
    return out


def m_step_emission_categorical(gamma: np.ndarray, observations: np.ndarray, symbol_count: int,
                                previous: Optional[Categorical] = None) -> Categorical:
    """``b[mu, v]`` = posterior mass of state ``mu`` on nodes showing ``v`` over all its mass."""
    gamma = np.asarray(gamma, dtype=np.float64)
    obs = np.asarray(observations, dtype=np.int64)
    N = gamma.shape[1]
    counts = np.zeros((N, symbol_count))
    for mu in range(N):
        counts[mu] = np.bincount(obs, weights=gamma[:, mu], minlength=symbol_count)[:symbol_count]
    totals = counts.sum(axis=1)
    probs = np.zeros_like(counts)
    for mu in range(N):
        if totals[mu] > 0:
            probs[mu] = counts[mu] / totals[mu]
        elif previous is not None:
            warnings.warn(f"state {mu} has zero occupancy; keeping its emission row", ZeroStateOccupancy)
            probs[mu] = previous.probs[mu]
        else:
            warnings.warn(f"state {mu} has zero occupancy; using a uniform emission row", ZeroStateOccupancy)
            probs[mu] = 1.0 / symbol_count
    return Categorical(probs)


def weighted_moments(x: np.ndarray, w: np.ndarray) -> tuple:
    """Weighted mean and (biased) standard deviation."""
    total = w.sum()
    mean = (w * x).sum() / total
    var = (w * (x - mean) ** 2).sum() / total
    return float(mean), float(np.sqrt(max(var, 0.0)))


def m_step_emission_gaussian(gamma: np.ndarray, observations: np.ndarray, previous: Optional[Gaussian] = None,
                             std_floor: float = DEFAULT_STD_FLOOR) -> Gaussian:
    """Posterior-weighted mean and standard deviation per state, std floored at ``std_floor``."""
    gamma = np.asarray(gamma, dtype=np.float64)
    x = np.asarray(observations, dtype=np.float64)
    N = gamma.shape[1]
    mean = np.zeros(N)
    std = np.zeros(N)
    for mu in range(N):
        if gamma[:, mu].sum() > 0:
            mean[mu], std[mu] = weighted_moments(x, gamma[:, mu])
        elif previous is not None:
            warnings.warn(f"state {mu} has zero occupancy; keeping its emission parameters", ZeroStateOccupancy)
            mean[mu], std[mu] = previous.mean[mu], previous.std[mu]
        else:
            raise DegenerateData(f"state {mu} has zero occupancy and no previous parameters")
    return Gaussian(mean, np.maximum(std, std_floor))


def m_step_pi(root_gammas: np.ndarray) -> np.ndarray:
    """Mean of the root posteriors over trees."""
    pi = np.asarray(root_gammas, dtype=np.float64).mean(axis=0)
    return pi / pi.sum()


def m_step(model: HmtModel, forest: Forest, stats: ForestStats, std_floor: float = DEFAULT_STD_FLOOR) -> HmtModel:
    obs = np.concatenate(forest.observations)
    if isinstance(model.emission, Categorical):
        emission = m_step_emission_categorical(stats.gamma, obs, model.emission.symbol_count, model.emission)
    else:
        emission = m_step_emission_gaussian(stats.gamma, obs, model.emission, std_floor)
    return HmtModel(m_step_pi(stats.root_gamma), m_step_transitions(stats.xi_sums, model.transitions), emission)


def em_update(model: HmtModel, forest: Forest, std_floor: float = DEFAULT_STD_FLOOR) -> HmtModel:
    """One full E-step + M-step."""
    return m_step(model, forest, forest_estep(model, forest), std_floor)


# ---------------------------------------------------------------------------
# initialization


def kmeans_1d(x: np.ndarray, k: int, max_iterations: int = 300) -> tuple:
    """Lloyd's algorithm in one dimension, seeded with the ``(j + 0.5) / k`` quantiles.

    Returns ``(centers, labels)`` with centers ascending.
    """
    x = np.asarray(x, dtype=np.float64)
    centers = np.quantile(x, (np.arange(k) + 0.5) / k)
    labels = np.full(len(x), -1)
    for _ in range(max_iterations):
        new = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centers[j] = members.mean()
    order = np.argsort(centers, kind="stable")
    relabel = np.empty(k, dtype=np.int64)
    relabel[order] = np.arange(k)
    return centers[order], relabel[labels]


def _hard_counts_model(forest: Forest, labels: list, N: int) -> tuple:
    """Add-one-smoothed root and transition frequencies from hard state labels."""
    pi = np.ones(N)
    counts = {n: np.ones((N,) * (n + 1)) for n in required_branching(forest)}
    for t, lab in zip(forest.trees, labels):
        pi[lab[t.root]] += 1
        for c in t.interior:
            ch = t.children[c]
            counts[len(ch)][(lab[c],) + tuple(lab[x] for x in ch)] += 1
    trans = {n: (a.reshape(N, -1) / a.reshape(N, -1).sum(axis=1, keepdims=True)).reshape(a.shape)
             for n, a in counts.items()}
    return pi / pi.sum(), trans


def init_kmeans_style(forest: Forest, N: int, seed: int = 0, std_floor: float = DEFAULT_STD_FLOOR) -> HmtModel:
    """Initial model from clustering the pooled observations into ``N`` groups.

    Scalar data: 1-D k-means assigns every node a state; root frequencies,
    per-cluster Gaussian moments and parent/child-tuple counts (with add-one
    smoothing) follow from the assignment. This path is deterministic and
    does not consume ``seed``.

    Categorical data: emissions are the pooled symbol frequencies perturbed
    by seeded Dirichlet noise (needed to break the symmetry between states),
    with near-uniform transitions and root distribution.
    """
    if forest.kind == CATEGORICAL:
        return _init_categorical(forest, N, seed)
    x = np.concatenate(forest.observations)
    if len(np.unique(x)) < N:
        raise DegenerateData(f"need at least {N} distinct observation values, found {len(np.unique(x))}")
    centers, labels = kmeans_1d(x, N)
    per_tree = np.split(labels, np.cumsum([t.node_count for t in forest.trees])[:-1])
    pi, trans = _hard_counts_model(forest, per_tree, N)
    mean = np.empty(N)
    std = np.empty(N)
    for j in range(N):
        mean[j], std[j] = weighted_moments(x, (labels == j).astype(np.float64))
    return HmtModel(pi, trans, Gaussian(mean, np.maximum(std, std_floor)))


def _init_categorical(forest: Forest, N: int, seed: int) -> HmtModel:
    rng = np.random.default_rng(seed)
    obs = np.concatenate(forest.observations)
    V = int(obs.max()) + 1
    freq = np.bincount(obs, minlength=V) + 1.0
    freq /= freq.sum()
    probs = 0.5 * freq[None, :] + 0.5 * rng.dirichlet(np.ones(V), size=N)
    probs /= probs.sum(axis=1, keepdims=True)
    trans = {}
    for n in required_branching(forest):
        rows = 0.5 / N**n + 0.5 * rng.dirichlet(np.ones(N**n), size=N)
        trans[n] = (rows / rows.sum(axis=1, keepdims=True)).reshape((N,) * (n + 1))
    pi = 0.5 / N + 0.5 * rng.dirichlet(np.ones(N))
    return HmtModel(pi / pi.sum(), trans, Categorical(probs))


# ---------------------------------------------------------------------------
# driver


def _check_finite(model: HmtModel, iteration: int) -> None:
    arrays = [model.pi, *model.transitions.values()]
    em = model.emission
    arrays += [em.probs] if isinstance(em, Categorical) else [em.mean, em.std]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NonFiniteParameter(f"non-finite parameter after iteration {iteration}")


def fit(forest: Forest, config: FitConfig = FitConfig(), states: Optional[int] = None) -> FitTrace:
    """Run EM from ``config.init`` until the log-likelihood gain drops below tolerance.

    ``states`` is required when ``config.init == "kmeans"``.

    Raises
    ------
    ImpossibleObservation
        The initial model gives the data zero likelihood.
    LikelihoodDecreased
        An iteration lowered the log-likelihood by more than the slack.
    """
    if isinstance(config.init, HmtModel):
        model = config.init
    elif config.init == "kmeans":
        if states is None:
            raise ValueError("states is required for kmeans-style initialization")
        model = init_kmeans_style(forest, states, config.seed, config.std_floor)
    else:
        raise ValueError(f"unknown init {config.init!r}")
    model.check()
    for n in required_branching(forest):
        model.tensor(n)

    trace = FitTrace()
    stats = forest_estep(model, forest)
    ll = stats.log_likelihood
    trace.models.append(model)
    trace.log_likelihoods.append(ll)
    for it in range(1, config.max_iterations + 1):
        model = m_step(model, forest, stats, config.std_floor)
        _check_finite(model, it)
        problems = validate(model)
        if problems:
            raise NonFiniteParameter(f"iteration {it} produced an invalid model: {problems[0]}")
        stats = forest_estep(model, forest)
        new_ll = stats.log_likelihood
        trace.models.append(model)
        trace.log_likelihoods.append(new_ll)
        log.debug("iteration %d: log-likelihood %.10g", it, new_ll)
        if new_ll < ll - MONOTONE_SLACK:
            raise LikelihoodDecreased(f"log-likelihood fell from {ll!r} to {new_ll!r} at iteration {it}")
        if abs(new_ll - ll) < config.log_likelihood_tolerance:
            trace.reason = "converged"
            return trace
        ll = new_ll
    trace.reason = "max_iterations"
    return trace
