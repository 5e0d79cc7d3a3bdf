"""Model parameters: root distribution, coupled transition tensors, emissions.

A transition tensor for nodes with ``n`` children is an ndarray of shape
``(N,) * (n + 1)``; ``a[mu0, mu1, ..., mun]`` is the joint probability of the
children's state tuple given the parent state. Its C-order flattening is the
normative flat layout ``mu0 * N**n + sum(mu_i * N**(n - i))``, so row ``mu0``
of ``a.reshape(N, -1)`` lists child tuples lexicographically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, InvalidModel, KindMismatch, MissingTensorForBranchingFactor
from .tree import CATEGORICAL, SCALAR

STOCHASTIC_TOL = 1e-12

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _frozen(x, dtype=np.float64) -> np.ndarray:
    a = np.array(x, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Categorical:
    """Discrete emissions; ``probs[mu, v]`` is the probability of symbol ``v`` in state ``mu``."""

    probs: np.ndarray

    kind = CATEGORICAL

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))

    @property
    def state_count(self) -> int:
        return self.probs.shape[0]

    @property
    def symbol_count(self) -> int:
        return self.probs.shape[1]

    def likelihoods(self, obs: np.ndarray) -> np.ndarray:
        """Emission probabilities, shape ``(len(obs), N)``. Symbols outside the alphabet get 0."""
        obs = np.asarray(obs, dtype=np.int64)
        out = np.zeros((len(obs), self.state_count))
        ok = (obs >= 0) & (obs < self.symbol_count)
        out[ok] = self.probs[:, obs[ok]].T
        return out

    def log_likelihoods(self, obs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.likelihoods(obs))

    def violations(self) -> list:
        out = []
        p = self.probs
        if p.ndim != 2 or p.shape[1] == 0:
            return [f"categorical emission table must be 2-D and non-empty, got shape {p.shape}"]
        if not np.all(np.isfinite(p)):
            out.append("categorical emission table has non-finite entries")
        for mu in np.flatnonzero((p < 0).any(axis=1)):
            out.append(f"emission row {mu} has negative entries")
        for mu, s in enumerate(p.sum(axis=1)):
            if abs(s - 1.0) > STOCHASTIC_TOL:
                out.append(f"emission row {mu} sums to {s!r}, not 1")
        return out

    def to_dict(self) -> dict:
        return {"type": "categorical", "probs": self.probs.tolist()}

    def permuted(self, perm) -> "Categorical":
        return Categorical(self.probs[list(perm)])


@dataclass(frozen=True, eq=False)
class Gaussian:
    """Univariate normal emissions with per-state ``mean`` and ``std``."""

    mean: np.ndarray
    std: np.ndarray

    kind = SCALAR

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "std", _frozen(self.std))

    @property
    def state_count(self) -> int:
        return len(self.mean)

    def log_likelihoods(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        z = (obs[:, None] - self.mean[None, :]) / self.std[None, :]
        return -0.5 * z * z - np.log(self.std)[None, :] - _LOG_SQRT_2PI

    def likelihoods(self, obs: np.ndarray) -> np.ndarray:
        """Density values, shape ``(len(obs), N)``."""
        return np.exp(self.log_likelihoods(obs))

    def violations(self) -> list:
        out = []
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            return [f"gaussian mean/std shapes differ: {self.mean.shape} vs {self.std.shape}"]
        if not np.all(np.isfinite(self.mean)):
            out.append("gaussian means must be finite")
        for mu, s in enumerate(self.std):
            if not (np.isfinite(s) and s > 0):
                out.append(f"gaussian std of state {mu} must be positive, got {s!r}")
        return out

    def to_dict(self) -> dict:
        return {"type": "gaussian", "mean": self.mean.tolist(), "std": self.std.tolist()}

    def permuted(self, perm) -> "Gaussian":
        return Gaussian(self.mean[list(perm)], self.std[list(perm)])


Emission = Union[Categorical, Gaussian]


@dataclass(frozen=True, eq=False)
class HmtModel:
    """Parameters ``(a, b, pi)`` of a hidden Markov tree with coupled branches.

    Construction does not validate; call :func:`validate` or :meth:`check`.
    """

    pi: np.ndarray
    transitions: Mapping[int, np.ndarray]
    emission: Emission

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen(self.pi))
        object.__setattr__(self, "transitions", {int(n): _frozen(a) for n, a in sorted(self.transitions.items())})

    @property
    def state_count(self) -> int:
        return len(self.pi)

    N = state_count

    def tensor(self, n: int) -> np.ndarray:
        try:
            return self.transitions[n]
        except KeyError:
            raise MissingTensorForBranchingFactor(n) from None

    def check(self) -> "HmtModel":
        problems = validate(self)
        if problems:
            raise InvalidModel(problems)
        return self

    def replace(self, **kw) -> "HmtModel":
        args = {"pi": self.pi, "transitions": self.transitions, "emission": self.emission}
        args.update(kw)
        return HmtModel(**args)

    def permuted(self, perm: Sequence[int]) -> "HmtModel":
        """Relabel states so that new state ``k`` is old state ``perm[k]``."""
        perm = list(perm)
        trans = {}
        for n, a in self.transitions.items():
            trans[n] = a[np.ix_(*([perm] * (n + 1)))]
        return HmtModel(self.pi[perm], trans, self.emission.permuted(perm))

    def to_dict(self) -> dict:
        return {
            "N": self.state_count,
            "pi": self.pi.tolist(),
            "transitions": {str(n): a.reshape(self.state_count, -1).tolist() for n, a in self.transitions.items()},
            "emission": self.emission.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HmtModel":
        N = int(d["N"])
        trans = {}
        for key, rows in d["transitions"].items():
            n = int(key)
            flat = np.asarray(rows, dtype=np.float64)
            if flat.shape != (N, N**n):
                raise DimensionMismatch(f"transitions[{key}] must have shape ({N}, {N ** n}), got {flat.shape}")
            trans[n] = flat.reshape((N,) * (n + 1))
        em = d["emission"]
        if em["type"] == "categorical":
            emission = Categorical(em["probs"])
        elif em["type"] == "gaussian":
            emission = Gaussian(em["mean"], em["std"])
        else:
            raise ValueError(f"unknown emission type {em['type']!r}")
        model = cls(d["pi"], trans, emission)
        if model.state_count != N:
            raise DimensionMismatch(f"pi has {model.state_count} entries but N = {N}")
        return model


def validate(m: HmtModel) -> list:
    """All constraint violations of ``m``; an empty list means the model is valid."""
    out = []
    N = m.state_count
    if m.pi.ndim != 1 or N == 0:
        return [f"pi must be a non-empty vector, got shape {m.pi.shape}"]
    if not np.all(np.isfinite(m.pi)) or np.any(m.pi < 0):
        out.append("pi has negative or non-finite entries")
    if abs(m.pi.sum() - 1.0) > STOCHASTIC_TOL:
        out.append(f"pi sums to {m.pi.sum()!r}, not 1")
    if not m.transitions:
        out.append("no transition tensors")
    for n, a in m.transitions.items():
        if n < 1:
            out.append(f"branching factor {n} must be positive")
            continue
        if a.shape != (N,) * (n + 1):
            out.append(f"transitions[{n}] has shape {a.shape}, expected {(N,) * (n + 1)}")
            continue
        rows = a.reshape(N, -1)
        if not np.all(np.isfinite(rows)):
            out.append(f"transitions[{n}] has non-finite entries")
        for mu0 in np.flatnonzero((rows < 0).any(axis=1)):
            out.append(f"transitions[{n}] row {mu0} has negative entries")
        for mu0, s in enumerate(rows.sum(axis=1)):
            if abs(s - 1.0) > STOCHASTIC_TOL:
                out.append(f"transitions[{n}] row {mu0} sums to {s!r}, not 1")
    if m.emission.state_count != N:
        out.append(f"emission has {m.emission.state_count} states, expected {N}")
    else:
        out.extend(m.emission.violations())
    return out


def renormalize(m: HmtModel) -> HmtModel:
    """Repair near-stochastic parameters by clipping negatives and rescaling rows."""

    def fix(rows):
        rows = np.clip(np.asarray(rows, dtype=np.float64), 0.0, None)
        return rows / rows.sum(axis=-1, keepdims=True)

    N = m.state_count
    trans = {n: fix(a.reshape(N, -1)).reshape(a.shape) for n, a in m.transitions.items()}
    emission = m.emission
    if isinstance(emission, Categorical):
        emission = Categorical(fix(emission.probs))
    return HmtModel(fix(m.pi), trans, emission)


def emission_density(m: HmtModel, state: int, obs) -> float:
    """Probability mass (categorical) or density (Gaussian) of ``obs`` in ``state``."""
    if m.emission.kind == CATEGORICAL:
        if isinstance(obs, (float, np.floating)) and not float(obs).is_integer():
            raise KindMismatch(f"categorical emission cannot score real observation {obs!r}")
        if isinstance(obs, bool) or int(obs) < 0:
            raise KindMismatch(f"categorical observation must be a non-negative integer, got {obs!r}")
    elif not isinstance(obs, (int, float, np.integer, np.floating)) or isinstance(obs, bool):
        raise KindMismatch(f"gaussian emission needs a real scalar, got {obs!r}")
    return float(m.emission.likelihoods(np.array([obs]))[0, state])


def child_tuple_marginal(a: np.ndarray, mu0: int, child_index: int, mu: int) -> float:
    """Probability that child ``child_index`` is in state ``mu`` given the parent is in ``mu0``."""
    row = a[mu0]
    return float(np.take(row, mu, axis=child_index).sum())


def child_marginals(a: np.ndarray, child_index: int) -> np.ndarray:
    """Matrix ``P[mu0, mu]`` of one child's marginal transition probabilities."""
    n = a.ndim - 1
    axes = tuple(ax for ax in range(1, n + 1) if ax != child_index + 1)
    return a.sum(axis=axes)


def factorized_tensor(per_child_matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Uncoupled tensor whose children transition independently.

    ``per_child_matrices[i]`` is the row-stochastic matrix of child ``i``.
    """
    mats = [np.asarray(P, dtype=np.float64) for P in per_child_matrices]
    if not mats:
        raise DimensionMismatch("need at least one child matrix")
    N = mats[0].shape[0]
    for P in mats:
        if P.shape != (N, N):
            raise DimensionMismatch(f"child matrices must all be {N}x{N}, got {P.shape}")
    out = mats[0]
    for i, P in enumerate(mats[1:], start=1):
        # P[mu0, mu_i] broadcast over the axes of children 0..i-1
        out = out[..., None] * P.reshape((N,) + (1,) * i + (N,))
    return out


def required_branching(forest) -> set:
    out = set()
    for t in forest.trees:
        out |= t.branching_factors()
    return out
