"""Likelihood and posterior computation on coupled-branch hidden Markov trees.

Two families of recursions are provided:

* unscaled upward/downward probabilities (``beta_tilde``, ``alpha_tilde``),
  exact but prone to underflow on large trees;
* scaled recursions in which the upward quantity at a node is the posterior
  of its state given its own subtree. Each node's normalizer is the ratio of
  its subtree evidence to the product of its children's subtree evidence, so
  the logs of all normalizers of a tree sum to its log-likelihood.

The scaled recursions divide by the prior state marginals ``P(h(C) = rho)``.
A ratio whose numerator and denominator are both zero is taken as 0: such a
state is unreachable and carries no probability mass.

All functions accept a single :class:`~coupled_hmt.tree.Tree` with its
observation vector; the ``forest_*`` variants run every tree of a forest in
one vectorized sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ImpossibleObservation, ZeroMarginalDivision
from .layout import Layout, compile_layout, tuple_sum
from .model import HmtModel, child_marginals
from .tree import Forest, Tree


@dataclass
class OpCounter:
    """Counts child-tuple terms visited by the tensor sums (the innermost loop)."""

    count: int = 0


@dataclass(frozen=True)
class UnscaledPasses:
    beta_tilde: np.ndarray
    alpha_tilde: np.ndarray

    @property
    def likelihood(self) -> float:
        return float(self.beta_tilde[0] @ self.alpha_tilde[0])


@dataclass(frozen=True)
class ScaledPasses:
    """Scaled upward/downward quantities for one tree (rows indexed by node)."""

    beta: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    node_log_normalizer: np.ndarray
    marginals: np.ndarray

    @property
    def log_likelihood(self) -> float:
        return float(self.node_log_normalizer.sum())


@dataclass(frozen=True)
class Posteriors:
    gamma: np.ndarray
    xi: dict = field(default_factory=dict)  # interior node -> array of shape (N,) * (n + 1)


def _layout_for(t: Tree) -> Layout:
    return compile_layout((t,))


def _check_tensors(m: HmtModel, lay: Layout) -> None:
    for n in lay.branching_factors():
        m.tensor(n)


def _ratio(num: np.ndarray, den: np.ndarray, nodes: Optional[np.ndarray] = None, lay: Optional[Layout] = None):
    """``num / den`` elementwise with 0/0 := 0; raises if ``num > 0`` where ``den == 0``."""
    zero = den == 0
    if np.any(zero & (num != 0)):
        k, s = np.argwhere(zero & (num != 0))[0]
        node = int(nodes[k]) if nodes is not None else int(k)
        if lay is not None:
            node = lay.locate(node)[1]
        raise ZeroMarginalDivision(node, int(s))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    out[zero] = 0.0
    return out


# ---------------------------------------------------------------------------
# flat-array kernels shared by single-tree and forest entry points


def _emissions(m: HmtModel, lay: Layout, obs_list) -> np.ndarray:
    obs = np.concatenate([np.asarray(o) for o in obs_list])
    return m.emission.likelihoods(obs)


def _marginals(m: HmtModel, lay: Layout) -> np.ndarray:
    N = m.state_count
    P = np.empty((lay.node_count, N))
    P[lay.roots] = m.pi
    for g in lay.down_groups:
        a = m.tensor(g.branching)
        for i in range(g.branching):
            P[g.children[:, i]] = P[g.parents] @ child_marginals(a, i)
    return P


def _backward_unscaled(m, lay, B):
    bt = np.empty_like(B)
    bt[lay.leaves] = B[lay.leaves]
    for g in lay.up_groups:
        a = m.tensor(g.branching)
        kids = [bt[g.children[:, i]] for i in range(g.branching)]
        bt[g.parents] = B[g.parents] * tuple_sum(a, kids)
    return bt


def _forward_unscaled(m, lay, B, bt):
    at = np.empty_like(B)
    at[lay.roots] = m.pi
    for g in lay.down_groups:
        a = m.tensor(g.branching)
        kids = [bt[g.children[:, i]] for i in range(g.branching)]
        up = B[g.parents] * at[g.parents]  # b_{mu0}(O(p)) * alpha~_p(mu0)
        for i in range(g.branching):
            M = tuple_sum(a, kids, keep=i)  # (k, mu0, rho), siblings summed out
            at[g.children[:, i]] = np.einsum("kr,krs->ks", up, M)
    return at


def _backward_scaled(m, lay, B, P, counter=None, strict=True):
    """Returns ``beta``, per-node log normalizers, and the tuple sums per group."""
    N = m.state_count
    beta = np.empty((lay.node_count, N))
    lognorm = np.empty(lay.node_count)
    sums = []

    def normalize(nodes, num):
        Z = num.sum(axis=1)
        bad = Z <= 0
        if np.any(bad):
            if strict:
                # the first vanishing node in sweep order is where the conflict originates
                raise ImpossibleObservation(*reversed(lay.locate(int(nodes[np.flatnonzero(bad)[0]]))))
            Z = np.where(bad, 1.0, Z)
        beta[nodes] = num / Z[:, None]
        with np.errstate(divide="ignore"):
            lognorm[nodes] = np.where(bad, -np.inf, np.log(Z))

    normalize(lay.leaves, B[lay.leaves] * P[lay.leaves])
    for g in lay.up_groups:
        a = m.tensor(g.branching)
        ratios = [_ratio(beta[g.children[:, i]], P[g.children[:, i]], g.children[:, i], lay) for i in range(g.branching)]
        S = tuple_sum(a, ratios)
        if counter is not None:
            counter.count += len(g.parents) * a.size
        sums.append(S)
        normalize(g.parents, B[g.parents] * P[g.parents] * S)
    return beta, lognorm, sums


def _forward_scaled(m, lay, beta, P):
    N = m.state_count
    alpha = np.empty((lay.node_count, N))
    gamma = np.empty((lay.node_count, N))
    alpha[lay.roots] = 1.0
    gamma[lay.roots] = beta[lay.roots]
    for g in lay.down_groups:
        a = m.tensor(g.branching)
        ratios = [_ratio(beta[g.children[:, i]], P[g.children[:, i]], g.children[:, i], lay) for i in range(g.branching)]
        S = tuple_sum(a, ratios)  # denominator over (rho', siblings) for each parent state
        w_gamma = _ratio(gamma[g.parents], S)
        w_alpha = _ratio(beta[g.parents] * alpha[g.parents], S)
        for i in range(g.branching):
            c = g.children[:, i]
            M = tuple_sum(a, ratios, keep=i)
            gamma[c] = ratios[i] * np.einsum("kr,krs->ks", w_gamma, M)
            alpha[c] = _ratio(np.einsum("kr,krs->ks", w_alpha, M), P[c], c, lay)
    return alpha, gamma


def _xi_weights(m, lay, g, alpha, beta, P, B):
    """Per-parent-state weights and child ratios so that ``xi = w[k, rho] * a * prod ratios``."""
    a = m.tensor(g.branching)
    ratios = [_ratio(beta[g.children[:, i]], P[g.children[:, i]], g.children[:, i], lay) for i in range(g.branching)]
    c = alpha[g.parents] * P[g.parents] * B[g.parents]
    S = tuple_sum(a, ratios)
    Z = (c * S).sum(axis=1)
    w = c / np.where(Z > 0, Z, 1.0)[:, None]
    return a, w, ratios


def _xi_tensor(a, w, ratios):
    """Full per-node tensors ``(k, N, N, ..., N)``."""
    out = w.reshape(w.shape + (1,) * (a.ndim - 1)) * a[None]
    for i, r in enumerate(ratios):
        shape = [r.shape[0]] + [1] * a.ndim
        shape[i + 2] = r.shape[1]
        out = out * r.reshape(shape)
    return out


# ---------------------------------------------------------------------------
# single-tree API


def backward_unscaled(m: HmtModel, t: Tree, obs) -> np.ndarray:
    """``beta_tilde[C, rho] = P(O(subtree of C) | h(C) = rho)``."""
    lay = _layout_for(t)
    _check_tensors(m, lay)
    return _backward_unscaled(m, lay, _emissions(m, lay, [obs]))


def forward_unscaled(m: HmtModel, t: Tree, obs, beta_tilde: np.ndarray) -> np.ndarray:
    """``alpha_tilde[C, rho] = P(O(outside subtree of C), h(C) = rho)``."""
    lay = _layout_for(t)
    _check_tensors(m, lay)
    return _forward_unscaled(m, lay, _emissions(m, lay, [obs]), beta_tilde)


def unscaled_passes(m: HmtModel, t: Tree, obs) -> UnscaledPasses:
    bt = backward_unscaled(m, t, obs)
    return UnscaledPasses(bt, forward_unscaled(m, t, obs, bt))


def likelihood_unscaled(m: HmtModel, t: Tree, obs) -> float:
    bt = backward_unscaled(m, t, obs)
    return float(bt[t.root] @ m.pi)


def state_marginals(m: HmtModel, t: Tree) -> np.ndarray:
    """Prior marginals ``P(h(C) = rho)`` propagated from the root distribution."""
    lay = _layout_for(t)
    _check_tensors(m, lay)
    return _marginals(m, lay)


def backward_scaled(m: HmtModel, t: Tree, obs, marginals: Optional[np.ndarray] = None, counter: Optional[OpCounter] = None):
    """Scaled upward pass.

    Returns
    -------
    beta : ndarray (|T|, N)
        ``P(h(C) = rho | O(subtree of C))``; rows sum to one.
    node_log_normalizer : ndarray (|T|,)
        Logs of the per-node normalizers; they sum to the log-likelihood.

    Raises
    ------
    ImpossibleObservation
        At the first node (leaves first) whose normalizer vanishes.
    """
    lay = _layout_for(t)
    _check_tensors(m, lay)
    P = _marginals(m, lay) if marginals is None else np.asarray(marginals)
    beta, lognorm, _ = _backward_scaled(m, lay, _emissions(m, lay, [obs]), P, counter=counter)
    return beta, lognorm


def log_likelihood_scaled(m: HmtModel, t: Tree, obs) -> float:
    """Log-likelihood of one tree; ``-inf`` when the observations are impossible."""
    lay = _layout_for(t)
    _check_tensors(m, lay)
    P = _marginals(m, lay)
    _, lognorm, _ = _backward_scaled(m, lay, _emissions(m, lay, [obs]), P, strict=False)
    return float(lognorm.sum())


def forward_scaled(m: HmtModel, t: Tree, obs, beta: np.ndarray, marginals: Optional[np.ndarray] = None):
    """Scaled downward pass; returns ``(alpha, gamma)`` with ``gamma = alpha * beta``."""
    lay = _layout_for(t)
    _check_tensors(m, lay)
    P = _marginals(m, lay) if marginals is None else np.asarray(marginals)
    return _forward_scaled(m, lay, np.asarray(beta), P)


def xi_scaled(m: HmtModel, t: Tree, obs, alpha: np.ndarray, beta: np.ndarray, marginals: Optional[np.ndarray] = None) -> dict:
    """Joint posterior of each interior node's state and its children's state tuple.

    Returns a dict mapping interior node id to an array of shape
    ``(N,) * (n + 1)`` summing to one.
    """
    lay = _layout_for(t)
    _check_tensors(m, lay)
    P = _marginals(m, lay) if marginals is None else np.asarray(marginals)
    B = _emissions(m, lay, [obs])
    out = {}
    for g in lay.down_groups:
        a, w, ratios = _xi_weights(m, lay, g, np.asarray(alpha), np.asarray(beta), P, B)
        xi = _xi_tensor(a, w, ratios)
        for row, p in enumerate(g.parents):
            out[int(p)] = xi[row]
    return dict(sorted(out.items()))


def scaled_passes(m: HmtModel, t: Tree, obs) -> ScaledPasses:
    lay = _layout_for(t)
    _check_tensors(m, lay)
    P = _marginals(m, lay)
    B = _emissions(m, lay, [obs])
    beta, lognorm, _ = _backward_scaled(m, lay, B, P)
    alpha, gamma = _forward_scaled(m, lay, beta, P)
    return ScaledPasses(beta, alpha, gamma, lognorm, P)


def posteriors(m: HmtModel, t: Tree, obs) -> Posteriors:
    sp = scaled_passes(m, t, obs)
    return Posteriors(sp.gamma, xi_scaled(m, t, obs, sp.alpha, sp.beta, sp.marginals))


# ---------------------------------------------------------------------------
# forest API


@dataclass(frozen=True)
class ForestStats:
    """E-step output over a forest: per-tree log-likelihoods and pooled sufficient statistics."""

    log_likelihoods: np.ndarray
    gamma: np.ndarray  # flat (total nodes, N)
    root_gamma: np.ndarray  # (trees, N)
    xi_sums: dict  # branching factor -> summed xi tensor
    layout: Layout

    @property
    def log_likelihood(self) -> float:
        return float(self.log_likelihoods.sum())


def forest_log_likelihoods(m: HmtModel, forest: Forest) -> np.ndarray:
    """Per-tree log-likelihoods; impossible trees get ``-inf``."""
    lay = compile_layout(forest.trees)
    _check_tensors(m, lay)
    P = _marginals(m, lay)
    _, lognorm, _ = _backward_scaled(m, lay, _emissions(m, lay, forest.observations), P, strict=False)
    return lay.tree_sums(lognorm)


def forest_estep(m: HmtModel, forest: Forest) -> ForestStats:
    """Scaled E-step over every tree; raises :class:`ImpossibleObservation` on zero-likelihood data."""
    lay = compile_layout(forest.trees)
    _check_tensors(m, lay)
    P = _marginals(m, lay)
    B = _emissions(m, lay, forest.observations)
    beta, lognorm, _ = _backward_scaled(m, lay, B, P)
    alpha, gamma = _forward_scaled(m, lay, beta, P)
    xi_sums = {}
    for g in lay.down_groups:
        a, w, ratios = _xi_weights(m, lay, g, alpha, beta, P, B)
        # sum over nodes of w[k, rho] * a[rho, ...] * prod_i ratios[i][k, mu_i]
        n = g.branching
        letters = "abcdefghijklmnopqrstuvwxy"[: n + 1]
        subs = ",".join(["Z" + letters[0], letters] + ["Z" + letters[i + 1] for i in range(n)]) + "->" + letters
        total = np.einsum(subs, w, a, *ratios)
        xi_sums[n] = xi_sums.get(n, 0) + total
    return ForestStats(lay.tree_sums(lognorm), gamma, gamma[lay.roots], xi_sums, lay)
