"""Numerical laboratory for extreme singular values of sparse bipartite random matrices."""

__version__ = "0.1.0"

from .errors import (BracketError, DomainError, EmptyLayerError, ForbiddenLambda, MismatchError,  # noqa: E402
                     NotATree, PreconditionFailed, SingularM1)
from .model import (BipartiteGraph, DegreeProfile, ModelParams, WeightDistribution,  # noqa: E402
                    degree_profile, is_connected, make_params, read_graph, sample_graph, write_graph)
from .theory import (bennett_rate, classify_regime, critical_q_star, error_parameter,  # noqa: E402
                     expected_outlier_count, lambda_q, lambda_q_inv, mp_density, mp_edges, thresholds)

__all__ = [
    "BracketError", "DomainError", "EmptyLayerError", "ForbiddenLambda", "MismatchError", "NotATree",
    "PreconditionFailed", "SingularM1", "BipartiteGraph", "DegreeProfile", "ModelParams",
    "WeightDistribution", "degree_profile", "is_connected", "make_params", "read_graph", "sample_graph",
    "write_graph", "bennett_rate", "classify_regime", "critical_q_star", "error_parameter",
    "expected_outlier_count", "lambda_q", "lambda_q_inv", "mp_density", "mp_edges", "thresholds",
]
