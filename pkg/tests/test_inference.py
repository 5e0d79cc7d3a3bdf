import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from instances import A, B, cycle_gaussian, random_instance, random_model

from coupled_hmt.errors import ImpossibleObservation, MissingTensorForBranchingFactor, ZeroMarginalDivision
from coupled_hmt.inference import (OpCounter, backward_scaled, backward_unscaled, forest_estep, forest_log_likelihoods,
                                   forward_scaled, forward_unscaled, likelihood_unscaled, log_likelihood_scaled,
                                   posteriors, scaled_passes, state_marginals, unscaled_passes, xi_scaled)
from coupled_hmt.model import Categorical, Gaussian, HmtModel, factorized_tensor
from coupled_hmt.oracle import enumerate_tree, subtree_posteriors
from coupled_hmt.simulate import SimConfig, sample_forest
from coupled_hmt.tree import Forest, build_tree, full_tree

SINGLE = build_tree([None])


# ---------------------------------------------------------------------------
# hand-computed examples on the perfectly coupled model


def test_unscaled_single_node(m1):
    assert backward_unscaled(m1, SINGLE, [A]).tolist() == [[1.0, 0.0]]
    assert likelihood_unscaled(m1, SINGLE, [A]) == 0.5


def test_unscaled_three_nodes(m1, three):
    bt = backward_unscaled(m1, three, [A, A, A])
    assert np.allclose(bt[0], [0.9, 0.0])
    at = forward_unscaled(m1, three, [A, A, A], bt)
    assert np.allclose(at[0], m1.pi)
    assert np.allclose(at[1], [0.45, 0.0])
    assert np.allclose(at[2], [0.45, 0.0])
    assert likelihood_unscaled(m1, three, [A, A, A]) == pytest.approx(0.45, abs=1e-15)


def test_zero_likelihood(m1, three):
    assert likelihood_unscaled(m1, three, [A, A, B]) == 0.0
    with pytest.raises(ImpossibleObservation) as err:
        backward_scaled(m1, three, [A, A, B])
    assert err.value.node == 0
    assert log_likelihood_scaled(m1, three, [A, A, B]) == -math.inf


def test_scaled_single_node(m1):
    beta, lognorm = backward_scaled(m1, SINGLE, [A])
    assert beta.tolist() == [[1.0, 0.0]]
    assert lognorm[0] == pytest.approx(math.log(0.5))


def test_scaled_three_nodes(m1, three):
    sp = scaled_passes(m1, three, [A, A, A])
    assert sp.log_likelihood == pytest.approx(math.log(0.45))
    assert np.allclose(sp.gamma, [[1, 0]] * 3)
    assert np.array_equal(sp.alpha[0], [1.0, 1.0])
    assert np.array_equal(sp.gamma[0], sp.beta[0])
    xi = xi_scaled(m1, three, [A, A, A], sp.alpha, sp.beta, sp.marginals)
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = 1.0
    assert np.allclose(xi[0], expected)


def test_missing_tensor(m1):
    t = build_tree([None, 0, 0, 0])
    with pytest.raises(MissingTensorForBranchingFactor):
        likelihood_unscaled(m1, t, [A] * 4)
    with pytest.raises(MissingTensorForBranchingFactor):
        backward_scaled(m1, t, [A] * 4)


# ---------------------------------------------------------------------------
# prior marginals


def test_marginals_root_and_symmetry(m1):
    P = state_marginals(m1, full_tree(4))
    assert np.array_equal(P[0], m1.pi)
    assert np.allclose(P[1:], 0.5)


def test_marginals_deterministic_cycle():
    m = cycle_gaussian(pi=(1.0, 0.0, 0.0))
    P = state_marginals(m, full_tree(4))
    assert np.array_equal(P[0], [1, 0, 0])
    assert np.array_equal(P[1], [0, 1, 0]) and np.array_equal(P[2], [0, 1, 0])
    assert np.all(P[3:7] == [0, 0, 1])
    assert np.all(P[7:] == [1, 0, 0])


def test_zero_marginals_use_zero_over_zero_convention():
    m = cycle_gaussian(pi=(1.0, 0.0, 0.0))
    t = full_tree(3)
    obs = [0.1, -0.2, 0.3, 4.1, 3.8, 4.4, 3.9]
    sp = scaled_passes(m, t, obs)
    res = enumerate_tree(m, t, obs)
    assert np.all(np.isfinite(sp.beta)) and np.all(np.isfinite(sp.alpha))
    assert np.allclose(sp.gamma, res.gamma_oracle, atol=1e-12)
    assert sp.log_likelihood == pytest.approx(math.log(res.likelihood), rel=1e-12)


def test_zero_marginal_division_reported(m1g, three):
    obs = [0.2, 3.9, 4.1]
    beta, _ = backward_scaled(m1g, three, obs)
    bad = state_marginals(m1g, three).copy()
    bad[1] = [1.0, 0.0]  # claims node 1 can never be in state 1
    with pytest.raises(ZeroMarginalDivision) as err:
        forward_scaled(m1g, three, obs, beta, bad)
    assert (err.value.node, err.value.state) == (1, 1)


# ---------------------------------------------------------------------------
# agreement with enumeration


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=80, deadline=None)
def test_passes_match_oracle(seed):
    rng = np.random.default_rng(seed)
    m, t, obs = random_instance(rng)
    res = enumerate_tree(m, t, obs)
    L = res.likelihood
    assert likelihood_unscaled(m, t, obs) == pytest.approx(L, rel=1e-9)
    sp = scaled_passes(m, t, obs)
    assert math.exp(sp.log_likelihood) == pytest.approx(L, rel=1e-9)
    assert np.allclose(sp.gamma, res.gamma_oracle, rtol=0, atol=1e-9)
    xi = xi_scaled(m, t, obs, sp.alpha, sp.beta, sp.marginals)
    assert xi.keys() == res.xi_oracle.keys()
    for c in xi:
        assert np.allclose(xi[c], res.xi_oracle[c], rtol=0, atol=1e-9)
    assert np.allclose(sp.beta, subtree_posteriors(m, t, obs), rtol=0, atol=1e-10)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=80, deadline=None)
def test_scaled_invariants(seed):
    rng = np.random.default_rng(seed)
    m, t, obs = random_instance(rng, max_nodes=15, categorical=False)
    sp = scaled_passes(m, t, obs)
    assert np.allclose(sp.beta.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(sp.gamma.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(sp.gamma, sp.alpha * sp.beta, atol=1e-9)
    assert np.allclose(sp.marginals.sum(axis=1), 1.0, atol=1e-9)
    assert np.array_equal(sp.marginals[t.root], m.pi)
    assert sp.log_likelihood == pytest.approx(log_likelihood_scaled(m, t, obs), rel=1e-12)
    post = posteriors(m, t, obs)
    for c, xi in post.xi.items():
        N = m.state_count
        assert np.allclose(xi.reshape(N, -1).sum(axis=1), post.gamma[c], atol=1e-9)
        # summing out everything but one child gives that child's posterior
        for i, x in enumerate(t.children[c]):
            axes = tuple(ax for ax in range(xi.ndim) if ax != i + 1)
            assert np.allclose(xi.sum(axis=axes), post.gamma[x], atol=1e-9)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_unscaled_constancy_and_scaled_agreement(seed):
    rng = np.random.default_rng(seed)
    m, t, obs = random_instance(rng, max_nodes=12)
    ps = unscaled_passes(m, t, obs)
    joint = (ps.alpha_tilde * ps.beta_tilde).sum(axis=1)
    L = ps.likelihood
    assert np.allclose(joint, L, rtol=1e-9, atol=0)
    leaves = list(t.leaves)
    assert np.allclose(ps.beta_tilde[leaves], m.emission.likelihoods(np.asarray(obs)[leaves]))
    sp = scaled_passes(m, t, obs)
    assert np.allclose(sp.gamma, ps.alpha_tilde * ps.beta_tilde / L, atol=1e-9)


def test_long_chain_overlap_regime(rng):
    # chain whose unscaled likelihood is tiny but still representable
    a = np.array([[0.8, 0.2], [0.3, 0.7]])
    m = HmtModel([0.5, 0.5], {1: a}, Gaussian([0.0, 3.0], [1.0, 1.0])).check()
    t = build_tree([None] + list(range(199)))
    obs = rng.normal(1.5, 2.0, size=200)
    L = likelihood_unscaled(m, t, obs)
    assert 0 < L < 1e-200
    assert log_likelihood_scaled(m, t, obs) == pytest.approx(math.log(L), rel=1e-10)


def test_forest_totals_are_sums(m1g):
    forest, _ = sample_forest(m1g, SimConfig(6, 4, seed=3))
    per_tree = forest_log_likelihoods(m1g, forest)
    expected = [log_likelihood_scaled(m1g, t, o) for t, o in forest]
    assert np.allclose(per_tree, expected, rtol=1e-12)
    stats = forest_estep(m1g, forest)
    assert stats.log_likelihood == pytest.approx(sum(expected), rel=1e-12)
    xi_total = np.zeros((2, 2, 2))
    gammas = []
    for t, o in forest:
        post = posteriors(m1g, t, o)
        gammas.append(post.gamma)
        xi_total += sum(post.xi.values())
    assert np.allclose(stats.gamma, np.concatenate(gammas), atol=1e-12)
    assert np.allclose(stats.xi_sums[2], xi_total, atol=1e-10)
    assert np.allclose(stats.root_gamma, [g[0] for g in gammas], atol=1e-12)


def test_forest_with_mixed_shapes(rng):
    m = random_model(rng, 3, [1, 2, 3], categorical=True)
    trees = [build_tree([None, 0, 0, 0, 1]), build_tree([None, 0, 1, 1]), build_tree([None])]
    obs = [rng.integers(0, 3, size=t.node_count) for t in trees]
    forest = Forest(tuple(trees), tuple(obs), "categorical")
    lls = forest_log_likelihoods(m, forest)
    for k, (t, o) in enumerate(forest):
        assert lls[k] == pytest.approx(math.log(enumerate_tree(m, t, o).likelihood), rel=1e-12)


def test_forest_impossible_tree_is_minus_inf(m1):
    t = build_tree([None, 0, 0])
    forest = Forest((t, t), ([A, A, A], [A, A, B]), "categorical")
    lls = forest_log_likelihoods(m1, forest)
    assert lls[0] == pytest.approx(math.log(0.45)) and lls[1] == -math.inf
    with pytest.raises(ImpossibleObservation):
        forest_estep(m1, forest)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_operation_count_scaling(n):
    t = full_tree(4, n)
    counts = {}
    for N in (2, 4):
        rng = np.random.default_rng(N)
        m = random_model(rng, N, [n], categorical=False)
        counter = OpCounter()
        backward_scaled(m, t, rng.normal(size=t.node_count), counter=counter)
        counts[N] = counter.count
    assert counts[4] / counts[2] == pytest.approx(2 ** (n + 1), rel=0.1)


def test_uncoupled_tensor_allows_factorized_inputs():
    P = np.array([[0.7, 0.3], [0.2, 0.8]])
    m = HmtModel([0.4, 0.6], {2: factorized_tensor([P, P])}, Categorical([[0.9, 0.1], [0.2, 0.8]])).check()
    t = full_tree(3)
    obs = [0, 1, 1, 0, 0, 1, 1]
    assert likelihood_unscaled(m, t, obs) == pytest.approx(enumerate_tree(m, t, obs).likelihood, rel=1e-12)
    # children of an uncoupled parent have the matrix's marginals
    assert np.allclose(state_marginals(m, t)[1], m.pi @ P)
