"""Hidden Markov trees whose children's hidden states are jointly coupled.

Inference (scaled and unscaled upward/downward passes), decoding, EM
learning, simulation, a brute-force oracle and a lineage-correlation
self-check.
"""

__version__ = "0.1.0"

from .errors import (AllZeroLikelihood, BudgetExceeded, CycleDetected, DanglingParent, DegenerateData,
                     DimensionMismatch, HmtError, ImpossibleObservation, InvalidModel, KindMismatch,
                     LikelihoodDecreased, MissingTensorForBranchingFactor, MultipleRoots, NonFiniteParameter,
                     TreeError, ZeroMarginalDivision, ZeroStateOccupancy)
from .tree import (CATEGORICAL, SCALAR, Forest, Tree, build_tree, downward_order, full_tree, lineage_distance,
                   lineage_distance_matrix, upward_order)
from .model import (Categorical, Gaussian, HmtModel, child_marginals, child_tuple_marginal, emission_density,
                    factorized_tensor, renormalize, validate)
from .inference import (OpCounter, backward_scaled, backward_unscaled, forest_estep, forest_log_likelihoods,
                        forward_scaled, forward_unscaled, likelihood_unscaled, log_likelihood_scaled, posteriors,
                        scaled_passes, state_marginals, unscaled_passes, xi_scaled)
from .decoding import best_scores, decode, log_joint, posterior_decode, viterbi_decode
from .learning import FitConfig, FitTrace, em_update, fit, init_kmeans_style
from .oracle import enumerate_tree, joint_probability, subtree_posteriors
from .simulate import SimConfig, sample_forest, sample_on_trees, sample_tree
from .selfcheck import lineage_correlations, self_consistency_report

__all__ = [
    "AllZeroLikelihood", "BudgetExceeded", "CycleDetected", "DanglingParent", "DegenerateData",
    "DimensionMismatch", "HmtError", "ImpossibleObservation", "InvalidModel", "KindMismatch",
    "LikelihoodDecreased", "MissingTensorForBranchingFactor", "MultipleRoots", "NonFiniteParameter",
    "TreeError", "ZeroMarginalDivision", "ZeroStateOccupancy", "CATEGORICAL", "SCALAR", "Forest", "Tree",
    "build_tree", "downward_order", "full_tree", "lineage_distance", "lineage_distance_matrix",
    "upward_order", "Categorical", "Gaussian", "HmtModel", "child_marginals", "child_tuple_marginal",
    "emission_density", "factorized_tensor", "renormalize", "validate", "OpCounter", "backward_scaled",
    "backward_unscaled", "forest_estep", "forest_log_likelihoods", "forward_scaled", "forward_unscaled",
    "likelihood_unscaled", "log_likelihood_scaled", "posteriors", "scaled_passes", "state_marginals",
    "unscaled_passes", "xi_scaled", "best_scores", "decode", "log_joint", "posterior_decode",
    "viterbi_decode", "FitConfig", "FitTrace", "em_update", "fit", "init_kmeans_style", "enumerate_tree",
    "joint_probability", "subtree_posteriors", "SimConfig", "sample_forest", "sample_on_trees", "sample_tree",
    "lineage_correlations", "self_consistency_report",
]
