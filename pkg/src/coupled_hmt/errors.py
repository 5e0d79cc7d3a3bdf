"""Exception types raised across the package.

Every error carries a stable ``name`` used by the CLI when reporting data or
model problems.
"""

from __future__ import annotations


class HmtError(Exception):
    """Base class for data/model errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


class TreeError(HmtError):
    pass


class MultipleRoots(TreeError):
    pass


class CycleDetected(TreeError):
    pass


class DanglingParent(TreeError):
    pass


class KindMismatch(HmtError):
    pass


class DimensionMismatch(HmtError):
    pass


class InvalidModel(HmtError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class MissingTensorForBranchingFactor(HmtError):
    def __init__(self, branching: int):
        self.branching = branching
        super().__init__(f"model has no transition tensor for {branching} children")


class ImpossibleObservation(HmtError):
    """The observed data has probability zero under the model."""

    def __init__(self, node: int, tree_index: int | None = None):
        self.node = node
        self.tree_index = tree_index
        where = f"node {node}" if tree_index is None else f"tree {tree_index}, node {node}"
        super().__init__(f"observations are impossible under the model (normalizer vanishes at {where})")


class ZeroMarginalDivision(HmtError):
    def __init__(self, node: int, state: int):
        self.node = node
        self.state = state
        super().__init__(f"prior marginal of state {state} is zero at node {node} but posterior mass is not")


class AllZeroLikelihood(HmtError):
    def __init__(self, node: int):
        self.node = node
        super().__init__(f"no state assignment has positive probability (first all-zero best score at node {node})")


class BudgetExceeded(HmtError):
    pass


class DegenerateData(HmtError):
    pass


class NonFiniteParameter(HmtError):
    pass


class LikelihoodDecreased(HmtError):
    pass


class ZeroStateOccupancy(UserWarning):
    """A state received no posterior mass; its previous parameters were kept."""
