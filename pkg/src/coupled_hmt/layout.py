"""Flattened, level-grouped index arrays for running tree recursions in bulk.

A list of trees is concatenated into one node array. Interior nodes are
grouped by ``(height, branching factor)`` for the leaves-to-root sweep and by
``(depth, branching factor)`` for the root-to-leaves sweep, so each group is
processed with a handful of vectorized tensor contractions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from string import ascii_lowercase

import numpy as np


@dataclass(frozen=True)
class Group:
    branching: int
    parents: np.ndarray  # (k,)
    children: np.ndarray  # (k, branching)


@dataclass(frozen=True)
class Layout:
    node_count: int
    offsets: np.ndarray  # start of each tree in the flat arrays, plus the total
    tree_of_node: np.ndarray
    roots: np.ndarray
    leaves: np.ndarray
    up_groups: tuple  # by increasing height
    down_groups: tuple  # by increasing parent depth

    @property
    def tree_count(self) -> int:
        return len(self.roots)

    def locate(self, g: int) -> tuple:
        """Map a flat node index to ``(tree_index, local_node)``."""
        k = int(self.tree_of_node[g])
        return k, int(g - self.offsets[k])

    def per_tree(self, values: np.ndarray) -> list:
        return [values[self.offsets[k] : self.offsets[k + 1]] for k in range(self.tree_count)]

    def tree_sums(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.tree_of_node, weights=values, minlength=self.tree_count)

    def branching_factors(self) -> set:
        return {g.branching for g in self.up_groups}


@lru_cache(maxsize=64)
def compile_layout(trees: tuple) -> Layout:
    sizes = [t.node_count for t in trees]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    up: dict = {}
    down: dict = {}
    roots, leaves, tree_of = [], [], []
    for k, t in enumerate(trees):
        off = int(offsets[k])
        tree_of.extend([k] * t.node_count)
        roots.append(off + t.root)
        depth = t.depth
        height = np.zeros(t.node_count, dtype=np.int64)
        for c in sorted(range(t.node_count), key=lambda c: -depth[c]):
            ch = t.children[c]
            if not ch:
                leaves.append(off + c)
                continue
            height[c] = 1 + max(height[x] for x in ch)
            glob = (off + c, tuple(off + x for x in ch))
            up.setdefault((int(height[c]), len(ch)), []).append(glob)
            down.setdefault((int(depth[c]), len(ch)), []).append(glob)

    def groups(d):
        out = []
        for (_, n), items in sorted(d.items()):
            parents = np.array([p for p, _ in items], dtype=np.int64)
            children = np.array([c for _, c in items], dtype=np.int64).reshape(len(items), n)
            out.append(Group(n, parents, children))
        return tuple(out)

    return Layout(
        node_count=int(offsets[-1]),
        offsets=offsets,
        tree_of_node=np.array(tree_of, dtype=np.int64),
        roots=np.array(roots, dtype=np.int64),
        leaves=np.array(sorted(leaves), dtype=np.int64),
        up_groups=groups(up),
        down_groups=groups(down),
    )


@lru_cache(maxsize=None)
def tuple_sum_subscripts(n: int, keep: int | None = None) -> str:
    """Einsum subscripts contracting a tensor with per-child weight vectors.

    With ``keep=None`` the result is ``S[k, mu0]``; otherwise the weights of
    child ``keep`` are left out and that child's axis is kept, giving
    ``M[k, mu0, mu_keep]``.
    """
    letters = ascii_lowercase[: n + 1]
    ops = [letters]
    for i in range(n):
        if i != keep:
            ops.append("Z" + letters[i + 1])
    out = "Z" + letters[0] + ("" if keep is None else letters[keep + 1])
    return ",".join(ops) + "->" + out


def tuple_sum(a: np.ndarray, weights: list, keep: int | None = None) -> np.ndarray:
    """``sum over child tuples of a[mu0, mu1..mun] * prod_i weights[i][k, mu_i]``."""
    n = a.ndim - 1
    ops = [w for i, w in enumerate(weights) if i != keep]
    if n == 1 and keep is None:
        return weights[0] @ a.T
    if n == 1:
        return np.broadcast_to(a, (len(weights[0]),) + a.shape).copy()
    return np.einsum(tuple_sum_subscripts(n, keep), a, *ops)
