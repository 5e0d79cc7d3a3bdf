import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from instances import A, B, m1_tensor

from coupled_hmt.errors import DimensionMismatch, InvalidModel, KindMismatch, MissingTensorForBranchingFactor
from coupled_hmt.model import (Categorical, Gaussian, HmtModel, child_marginals, child_tuple_marginal,
                               emission_density, factorized_tensor, renormalize, validate)


def stochastic_matrices(N):
    rows = hnp.arrays(np.float64, (N, N), elements=st.floats(0.01, 1.0))
    return rows.map(lambda x: x / x.sum(axis=1, keepdims=True))


def test_m1_is_valid(m1):
    assert validate(m1) == []


def test_row_sum_violation_names_location():
    a = m1_tensor().copy()
    a[1, 0, 0] = 0.0  # row 1 now sums to 0.9
    bad = HmtModel([0.5, 0.5], {2: a}, Categorical(np.eye(2)))
    problems = validate(bad)
    assert len(problems) == 1
    assert "transitions[2] row 1" in problems[0]
    with pytest.raises(InvalidModel):
        bad.check()


def test_zero_std_violation():
    bad = HmtModel([0.5, 0.5], {2: m1_tensor()}, Gaussian([0, 1], [1.0, 0.0]))
    assert any("std" in p for p in validate(bad))


def test_pi_and_shape_violations():
    bad = HmtModel([0.6, 0.6], {2: np.full((2, 2), 0.5)}, Gaussian([0, 1], [1, 1]))
    problems = validate(bad)
    assert any("pi sums" in p for p in problems)
    assert any("shape" in p for p in problems)


def test_renormalize_repairs_rows():
    a = m1_tensor() * 1.01
    fixed = renormalize(HmtModel([0.5, 0.5], {2: a}, Categorical([[1.0, 1.0], [0.0, 2.0]])))
    assert validate(fixed) == []
    assert fixed.transitions[2][0, 0, 0] == pytest.approx(0.9)


def test_missing_tensor(m1):
    with pytest.raises(MissingTensorForBranchingFactor):
        m1.tensor(3)


def test_categorical_density(m1):
    assert emission_density(m1, 0, A) == 1.0
    assert emission_density(m1, 0, B) == 0.0
    with pytest.raises(KindMismatch):
        emission_density(m1, 0, 0.5)


def test_gaussian_density():
    m = HmtModel([0.5, 0.5], {2: m1_tensor()}, Gaussian([0.0, 2.0], [1.0, 0.5]))
    assert emission_density(m, 0, 0.0) == pytest.approx(0.3989422804014327, rel=1e-12)
    # independent evaluation of the normal density with mean 2, std 0.5
    expected = 1.0 / (0.5 * math.sqrt(2 * math.pi))
    assert emission_density(m, 1, 2.0) == pytest.approx(expected, rel=1e-12)
    assert emission_density(m, 1, 2.0) == pytest.approx(0.79788456, abs=1e-8)
    with pytest.raises(KindMismatch):
        emission_density(m, 0, "A")


def test_child_tuple_marginal_coupled():
    a = m1_tensor()
    assert child_tuple_marginal(a, 0, 0, 0) == pytest.approx(0.9)
    assert child_tuple_marginal(a, 0, 1, 1) == pytest.approx(0.1)
    assert sum(child_tuple_marginal(a, 1, 0, mu) for mu in range(2)) == pytest.approx(1.0)


def test_factorized_examples():
    ident = factorized_tensor([np.eye(2), np.eye(2)])
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = expected[1, 1, 1] = 1.0
    assert np.array_equal(ident, expected)
    uni = factorized_tensor([np.full((2, 2), 0.5)] * 2)
    assert np.allclose(uni, 0.25)
    with pytest.raises(DimensionMismatch):
        factorized_tensor([np.eye(2), np.eye(3)])


@given(st.integers(2, 3).flatmap(lambda N: st.lists(stochastic_matrices(N), min_size=1, max_size=3)))
@settings(max_examples=60, deadline=None)
def test_factorized_tensor_properties(mats):
    a = factorized_tensor(mats)
    N, n = mats[0].shape[0], len(mats)
    assert a.shape == (N,) * (n + 1)
    assert validate(HmtModel(np.full(N, 1.0 / N), {n: a}, Gaussian(np.zeros(N), np.ones(N)))) == []
    for i, P in enumerate(mats):
        assert np.allclose(child_marginals(a, i), P, atol=1e-12)
        for mu0 in range(N):
            for mu in range(N):
                assert child_tuple_marginal(a, mu0, i, mu) == pytest.approx(P[mu0, mu], abs=1e-12)
    # brute-force product check on every entry
    for idx in np.ndindex(a.shape):
        assert a[idx] == pytest.approx(np.prod([mats[i][idx[0], idx[i + 1]] for i in range(n)]), abs=1e-15)


@given(st.integers(2, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_random_tensor_marginals_normalized(N, n, seed):
    rng = np.random.default_rng(seed)
    a = rng.dirichlet(np.ones(N**n), size=N).reshape((N,) * (n + 1))
    for i in range(n):
        assert np.allclose(child_marginals(a, i).sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(a.reshape(N, -1).sum(axis=1), 1.0, atol=1e-12)


def test_coupling_survives_validation(m1):
    # zero mass on mixed tuples must not be smoothed away
    assert m1.transitions[2][0, 0, 1] == 0.0 and m1.transitions[2][0, 1, 0] == 0.0


def test_flat_layout_is_c_order():
    N, n = 3, 2
    flat = np.arange(N ** (n + 1), dtype=float)
    a = flat.reshape((N,) * (n + 1))
    for mu0, mu1, mu2 in np.ndindex(a.shape):
        assert a[mu0, mu1, mu2] == flat[mu0 * N**n + mu1 * N + mu2]


def test_dict_round_trip(m1, m1g):
    for m in (m1, m1g):
        back = HmtModel.from_dict(m.to_dict())
        assert back.to_dict() == m.to_dict()
        assert np.array_equal(back.transitions[2], m.transitions[2])


def test_from_dict_shape_error():
    d = {"N": 2, "pi": [0.5, 0.5], "transitions": {"2": [[1, 0, 0], [0, 0, 1]]},
         "emission": {"type": "gaussian", "mean": [0, 1], "std": [1, 1]}}
    with pytest.raises(DimensionMismatch):
        HmtModel.from_dict(d)


def test_permuted_relabels_states(m1g):
    p = m1g.permuted([1, 0])
    assert np.array_equal(p.emission.mean, [4.0, 0.0])
    assert p.transitions[2][1, 1, 1] == 0.9 and p.transitions[2][0, 0, 0] == 0.9
    assert validate(p) == []


def test_models_are_immutable(m1):
    with pytest.raises(ValueError):
        m1.pi[0] = 1.0
    with pytest.raises(ValueError):
        m1.transitions[2][0, 0, 0] = 0.0
