"""Slow/fast decompositions and exact reductions of mass-action networks."""

from .crn import (
    BUILTIN_MODELS,
    ConservationBasis,
    CrnModel,
    Reaction,
    ReducedSystem,
    build_rhs,
    builtin_reduction,
    conservation_laws,
    load_model,
    reduce_to_class,
    totals_from_ics,
)
from .errors import ChartError, ModelError, NumericalError, SlowfastError
from .geometry import ChartSplit, GeometryClass, ManifoldPoint, classify_fibers, \
    classify_form, default_split, implicit_jet, solve_graph
from .reduction import Projectors, ReductionJet, build_projectors, \
    conjugacy_residual, parametrize, reduced_field_1
from .scaling import EpsilonSystem, Factorization, ScalingAssignment, \
    detect_singular, expand, factorize

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_MODELS",
    "ChartError",
    "ChartSplit",
    "ConservationBasis",
    "CrnModel",
    "EpsilonSystem",
    "Factorization",
    "GeometryClass",
    "ManifoldPoint",
    "ModelError",
    "NumericalError",
    "Projectors",
    "Reaction",
    "ReducedSystem",
    "ReductionJet",
    "ScalingAssignment",
    "SlowfastError",
    "build_projectors",
    "build_rhs",
    "builtin_reduction",
    "classify_fibers",
    "classify_form",
    "conjugacy_residual",
    "conservation_laws",
    "default_split",
    "detect_singular",
    "expand",
    "factorize",
    "implicit_jet",
    "load_model",
    "parametrize",
    "reduce_to_class",
    "reduced_field_1",
    "solve_graph",
    "totals_from_ics",
]
