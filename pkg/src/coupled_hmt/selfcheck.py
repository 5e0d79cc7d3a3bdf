"""Self-consistency check of a fitted model through lineage-binned correlations.

Observation pairs within each tree are binned by lineage distance ``(m, n)``
(edges from each node up to their most recent common ancestor, ``m <= n``)
and pooled across the forest. The fitted model is judged consistent when a
forest simulated from it on the same tree shapes reproduces the data's
Pearson correlation in every bin to within a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .model import HmtModel
from .simulate import sample_on_trees
from .tree import SCALAR, Forest, Tree, lineage_distance_matrix

DEFAULT_THRESHOLD = 0.1


@dataclass(frozen=True)
class BinCorrelation:
    pearson_r: float  # nan when every pooled value in the bin is identical
    pair_count: int

    @property
    def defined(self) -> bool:
        return not math.isnan(self.pearson_r)


@lru_cache(maxsize=32)
def _pair_index(t: Tree) -> dict:
    """For each bin, node index arrays ``(first, second)`` over unordered pairs, smaller-m node first."""
    up, down = lineage_distance_matrix(t)
    iu, iv = np.triu_indices(t.node_count, k=1)
    mu, mv = up[iu, iv], down[iu, iv]
    swap = mu > mv
    first = np.where(swap, iv, iu)
    second = np.where(swap, iu, iv)
    lo, hi = np.minimum(mu, mv), np.maximum(mu, mv)
    out = {}
    for m, n in set(zip(lo.tolist(), hi.tolist())):
        sel = (lo == m) & (hi == n)
        out[(m, n)] = (first[sel], second[sel])
    return out


def lineage_correlations(forest: Forest, max_distance: Optional[int] = None) -> dict:
    """Pooled Pearson correlation of observation pairs per lineage-distance bin.

    Each unordered pair enters in both orders, so the statistic does not
    depend on which node is listed first. Bins with fewer than two pairs are
    omitted; bins with zero variance report ``nan``.
    """
    if forest.kind != SCALAR:
        raise ValueError("lineage correlations need scalar observations")
    if max_distance is not None and max_distance < 1:
        raise ValueError("max_distance must be at least 1")
    sums: dict = {}
    for t, x in forest:
        for key, (i, j) in _pair_index(t).items():
            if max_distance is not None and key[1] > max_distance:
                continue
            a, b = x[i], x[j]
            acc = sums.setdefault(key, np.zeros(4))
            acc += (len(a), a.sum() + b.sum(), (a * a).sum() + (b * b).sum(), 2.0 * (a * b).sum())
    out = {}
    for key in sorted(sums):
        pairs, s1, s2, sab = sums[key]
        pairs = int(pairs)
        if pairs < 2:
            continue
        n = 2.0 * pairs  # both orders of every pair
        mean = s1 / n
        var = s2 / n - mean * mean
        cov = sab / n - mean * mean
        if var <= 1e-14 * max(1.0, s2 / n):
            r = float("nan")
        else:
            r = float(np.clip(cov / var, -1.0, 1.0))
        out[key] = BinCorrelation(r, pairs)
    return out


@dataclass(frozen=True)
class BinComparison:
    m: int
    n: int
    pair_count: int
    r_data: float
    r_sim: float

    @property
    def abs_diff(self) -> float:
        return abs(self.r_data - self.r_sim)


@dataclass(frozen=True)
class SelfCheckReport:
    rows: tuple
    threshold: float
    passed: bool

    @property
    def failing(self) -> list:
        return [r for r in self.rows if not math.isnan(r.abs_diff) and r.abs_diff > self.threshold]


def self_consistency_report(data: Forest, fitted: HmtModel, seed: int = 0, threshold: float = DEFAULT_THRESHOLD,
                            max_distance: Optional[int] = None) -> SelfCheckReport:
    """Compare lineage correlations of ``data`` with a forest simulated from ``fitted``.

    The simulated forest reuses the data's tree shapes. The check passes when
    every bin defined in both forests differs by at most ``threshold``;
    undefined (zero-variance) bins are reported but do not count.
    """
    fitted.check()
    simulated, _ = sample_on_trees(fitted, data.trees, seed)
    r_data = lineage_correlations(data, max_distance)
    r_sim = lineage_correlations(simulated, max_distance)
    rows = []
    for key in sorted(set(r_data) | set(r_sim)):
        d = r_data.get(key, BinCorrelation(float("nan"), 0))
        s = r_sim.get(key, BinCorrelation(float("nan"), 0))
        rows.append(BinComparison(key[0], key[1], d.pair_count, d.pearson_r, s.pearson_r))
    passed = all(math.isnan(r.abs_diff) or r.abs_diff <= threshold for r in rows)
    return SelfCheckReport(tuple(rows), threshold, passed)
