"""treecomp: tree/graph metric comparisons, pivotal trees, and sphere MTW checks."""

from .metric import (
    CenteredMatrix,
    FiniteMetricSpace,
    NotEmbeddable,
    centered_matrix,
    euclidean_embed,
    matrix_inequality_check,
    read_metric_file,
    validate_metric,
    write_metric_file,
)
from .solver import (
    Certificate,
    GramProblem,
    plant_feasible,
    problem_from_graph,
    problem_from_tree,
    solve,
    spherical_solve,
    verify_certificate,
)
from .trees import (
    ComparisonTree,
    ConstraintGraph,
    contains_induced_tripod,
    format_tree,
    graph_to_constraints,
    parse_tree,
    tree_isomorphic,
    tree_to_constraints,
)

__version__ = "0.1.0"

__all__ = [
    "CenteredMatrix",
    "Certificate",
    "ComparisonTree",
    "ConstraintGraph",
    "FiniteMetricSpace",
    "GramProblem",
    "NotEmbeddable",
    "centered_matrix",
    "contains_induced_tripod",
    "euclidean_embed",
    "format_tree",
    "graph_to_constraints",
    "matrix_inequality_check",
    "parse_tree",
    "plant_feasible",
    "problem_from_graph",
    "problem_from_tree",
    "read_metric_file",
    "solve",
    "spherical_solve",
    "tree_isomorphic",
    "tree_to_constraints",
    "validate_metric",
    "verify_certificate",
    "write_metric_file",
]
