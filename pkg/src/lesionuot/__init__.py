"""Longitudinal lesion matching with entropic unbalanced optimal transport."""

from .baselines import distance_bipartite, normdist_bipartite
from .core import (
    ConfigError,
    DegenerateCaseError,
    EvaluationInputError,
    InvalidLesionError,
    LesionInstance,
    LesionSet,
    LesionUOTError,
    MatchConfig,
    NumericalError,
)
from .cost import CostBreakdown, build_cost_matrix
from .estimators import DistanceBipartiteMatcher, NormDistanceBipartiteMatcher, UOTMatcher
from .graph import EvolutionGraph, MatchResult, label_events, match_case, prune_plan
from .metrics import EvalReport, evaluate
from .prior import AsymmetryPrior, asymmetry_prior, effective_penalties
from .synth import SynthSpec, generate_case, generate_suite
from .uot import TransportPlan, solve_uot, uot_objective
from .volume import DeformationField, Volume3D, extract_lesions, jacobian_determinant

__version__ = "0.1.0"

__all__ = [
    "AsymmetryPrior",
    "ConfigError",
    "CostBreakdown",
    "DegenerateCaseError",
    "DeformationField",
    "DistanceBipartiteMatcher",
    "EvalReport",
    "EvaluationInputError",
    "EvolutionGraph",
    "InvalidLesionError",
    "LesionInstance",
    "LesionSet",
    "LesionUOTError",
    "MatchConfig",
    "MatchResult",
    "NormDistanceBipartiteMatcher",
    "NumericalError",
    "SynthSpec",
    "TransportPlan",
    "UOTMatcher",
    "Volume3D",
    "asymmetry_prior",
    "build_cost_matrix",
    "distance_bipartite",
    "effective_penalties",
    "evaluate",
    "extract_lesions",
    "generate_case",
    "generate_suite",
    "jacobian_determinant",
    "label_events",
    "match_case",
    "normdist_bipartite",
    "prune_plan",
    "solve_uot",
    "uot_objective",
]
