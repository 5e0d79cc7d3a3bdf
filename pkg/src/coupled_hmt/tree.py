"""Outward directed rooted trees and forests of observed trees."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import CycleDetected, DanglingParent, KindMismatch, MultipleRoots

CATEGORICAL = "categorical"
SCALAR = "scalar"


@dataclass(frozen=True, eq=False)
class Tree:
    """A rooted tree with ordered children.

    Attributes
    ----------
    parent : tuple of int or None
        ``parent[c]`` is the parent of node ``c``; ``None`` only at the root.
    children : tuple of tuple of int
        Children of each node, ascending by node id. Child position ``i``
        is axis ``i + 1`` of the parent's transition tensor.
    root : int
    """

    parent: tuple
    children: tuple
    root: int

    @property
    def node_count(self) -> int:
        return len(self.parent)

    def __len__(self) -> int:
        return len(self.parent)

    def __eq__(self, other) -> bool:
        return isinstance(other, Tree) and self.parent == other.parent

    def __hash__(self) -> int:
        return hash(self.parent)

    @cached_property
    def leaves(self) -> tuple:
        return tuple(c for c, ch in enumerate(self.children) if not ch)

    @cached_property
    def interior(self) -> tuple:
        return tuple(c for c, ch in enumerate(self.children) if ch)

    @cached_property
    def depth(self) -> np.ndarray:
        """Edge count from the root for every node."""
        d = np.zeros(self.node_count, dtype=np.int64)
        for c in downward_order(self):
            p = self.parent[c]
            if p is not None:
                d[c] = d[p] + 1
        return d

    def siblings(self, c: int) -> tuple:
        p = self.parent[c]
        if p is None:
            return ()
        return tuple(s for s in self.children[p] if s != c)

    def child_position(self, c: int) -> int:
        """Index of ``c`` within its parent's children list."""
        return self.children[self.parent[c]].index(c)

    def branching_factors(self) -> set:
        return {len(ch) for ch in self.children if ch}


def build_tree(parent_of: Sequence[Optional[int]]) -> Tree:
    """Build a :class:`Tree` from a parent array (``None`` marks the root)."""
    n = len(parent_of)
    if n == 0:
        raise ValueError("a tree needs at least one node")
    parents = []
    for c, p in enumerate(parent_of):
        if p is None:
            parents.append(None)
            continue
        p = int(p)
        if p < 0 or p >= n:
            raise DanglingParent(f"node {c} has parent {p}, outside 0..{n - 1}")
        parents.append(p)
    roots = [c for c, p in enumerate(parents) if p is None]
    if len(roots) > 1:
        raise MultipleRoots(f"nodes {roots} have no parent")
    if not roots:
        raise CycleDetected("no node lacks a parent, so the parent links form a cycle")
    children = [[] for _ in range(n)]
    for c, p in enumerate(parents):
        if p is not None:
            children[p].append(c)
    # reachability from the root rules out cycles among the remaining nodes
    seen = np.zeros(n, dtype=bool)
    stack = [roots[0]]
    while stack:
        c = stack.pop()
        seen[c] = True
        stack.extend(children[c])
    if not seen.all():
        bad = int(np.flatnonzero(~seen)[0])
        raise CycleDetected(f"node {bad} is not reachable from the root")
    return Tree(tuple(parents), tuple(tuple(ch) for ch in children), roots[0])


def full_tree(depth: int, branching: int = 2) -> Tree:
    """Full ``branching``-ary tree with ``depth`` node levels, in breadth-first order."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if branching < 1:
        raise ValueError("branching must be at least 1")
    parents: list = [None]
    level = [0]
    for _ in range(depth - 1):
        nxt = []
        for p in level:
            for _ in range(branching):
                parents.append(p)
                nxt.append(len(parents) - 1)
        level = nxt
    return build_tree(parents)


def downward_order(t: Tree) -> list:
    """Breadth-first order from the root; every parent precedes its children."""
    order = [t.root]
    i = 0
    while i < len(order):
        order.extend(t.children[order[i]])
        i += 1
    return order


def upward_order(t: Tree) -> list:
    """Every node after all of its descendants; the root comes last.

    Nodes are listed deepest level first, ascending id within a level.
    """
    depth = t.depth
    return sorted(range(t.node_count), key=lambda c: (-depth[c], c))


def _ancestors(t: Tree, u: int) -> list:
    path = [u]
    while t.parent[path[-1]] is not None:
        path.append(t.parent[path[-1]])
    return path


def lineage_distance(t: Tree, u: int, v: int) -> tuple:
    """Edge counts ``(m, n)`` from ``u`` and ``v`` to their most recent common ancestor, with ``m <= n``."""
    du = {a: k for k, a in enumerate(_ancestors(t, u))}
    for k, a in enumerate(_ancestors(t, v)):
        if a in du:
            m, n = du[a], k
            return (m, n) if m <= n else (n, m)
    raise AssertionError("nodes of one tree always share the root")


def lineage_distance_matrix(t: Tree) -> tuple:
    """All-pairs lineage distances.

    Returns
    -------
    up, down : ndarray of int, shape (node_count, node_count)
        ``up[u, v]`` is the edge count from ``u`` to the common ancestor of
        ``u`` and ``v``; ``down[u, v] == up[v, u]``.
    """
    n = t.node_count
    depth = t.depth
    # lca via ancestor indicator matrix: anc[u, a] is True if a is an ancestor-or-self of u
    anc = np.zeros((n, n), dtype=bool)
    for c in downward_order(t):
        p = t.parent[c]
        if p is not None:
            anc[c] = anc[p]
        anc[c, c] = True
    common = anc.astype(np.int64) @ anc.T.astype(np.int64)  # number of shared ancestors
    lca_depth = common - 1
    up = depth[:, None] - lca_depth
    return up, up.T.copy()


@dataclass(frozen=True, eq=False)
class Forest:
    """Observed trees sharing one observation kind.

    ``observations[k]`` is a 1-D array aligned with the nodes of ``trees[k]``:
    integer symbol ids for ``kind == "categorical"``, floats for ``"scalar"``.
    """

    trees: tuple
    observations: tuple
    kind: str = SCALAR

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, SCALAR):
            raise ValueError(f"unknown observation kind {self.kind!r}")
        if not self.trees:
            raise ValueError("a forest needs at least one tree")
        if len(self.trees) != len(self.observations):
            raise ValueError("one observation vector is needed per tree")
        obs = []
        for k, (t, o) in enumerate(zip(self.trees, self.observations)):
            o = np.asarray(o)
            if o.ndim != 1 or len(o) != t.node_count:
                raise ValueError(f"tree {k}: expected {t.node_count} observations, got shape {o.shape}")
            if self.kind == CATEGORICAL:
                if not (np.issubdtype(o.dtype, np.integer) or np.issubdtype(o.dtype, np.floating)):
                    raise KindMismatch(f"tree {k}: categorical observations must be non-negative integers")
                if np.any(o < 0) or np.any(o != np.round(o)):
                    raise KindMismatch(f"tree {k}: categorical observations must be non-negative integers")
                o = o.astype(np.int64)
            else:
                o = o.astype(np.float64)
            o.setflags(write=False)
            obs.append(o)
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "observations", tuple(obs))

    def __len__(self) -> int:
        return len(self.trees)

    def __iter__(self):
        return iter(zip(self.trees, self.observations))

    @property
    def node_count(self) -> int:
        return sum(t.node_count for t in self.trees)
