"""Exact incentivizability analysis and mechanism synthesis on effort
graphs: decide which effort profiles a linear mechanism can induce,
build such a mechanism, simulate the agent, and optimize concave
objectives over the incentivizable region."""

from .agent import (
    KktReport,
    NonConvergence,
    best_response,
    brute_force_response,
    kkt_verify,
    project_simplex,
)
from .documents import (
    DocumentError,
    emit_graph,
    load_graph,
    parse_graph,
    save_graph,
)
from .exactlp import LinearProgram, LpSolution, solve
from .kappa import (
    DegenerateSynthesis,
    Decision,
    DesignatedFeasibility,
    KappaCertificate,
    NotIncentivizable,
    SynthesisResult,
    decide,
    feasible_designated,
    in_polytope,
    kappa_of_action,
    kappa_of_set,
    rational_profile,
    synthesize,
)
from .model import (
    ConcaveFn,
    EffortGraph,
    EffortProfile,
    LinearMechanism,
    ValidationReport,
    feature_values,
    partials,
    utility,
    validate_graph,
)
from .optimizer import (
    ConcaveObjective,
    DesignatedSet,
    InfeasibleDesignatedSet,
    OptimizeResult,
    SimpleGraph,
    gadget_from_graph,
    incentivizable_supports,
    independent_sets_bruteforce,
    optimize_profile,
)

__version__ = "0.1.0"

__all__ = [
    "ConcaveFn",
    "ConcaveObjective",
    "Decision",
    "DegenerateSynthesis",
    "DesignatedFeasibility",
    "DesignatedSet",
    "DocumentError",
    "EffortGraph",
    "EffortProfile",
    "InfeasibleDesignatedSet",
    "KappaCertificate",
    "KktReport",
    "LinearMechanism",
    "LinearProgram",
    "LpSolution",
    "NonConvergence",
    "NotIncentivizable",
    "OptimizeResult",
    "SimpleGraph",
    "SynthesisResult",
    "ValidationReport",
    "best_response",
    "brute_force_response",
    "decide",
    "emit_graph",
    "feasible_designated",
    "feature_values",
    "gadget_from_graph",
    "in_polytope",
    "incentivizable_supports",
    "independent_sets_bruteforce",
    "kappa_of_action",
    "kappa_of_set",
    "kkt_verify",
    "load_graph",
    "optimize_profile",
    "parse_graph",
    "partials",
    "project_simplex",
    "rational_profile",
    "save_graph",
    "solve",
    "synthesize",
    "utility",
    "validate_graph",
]
