"""Multiplicity of fixed points from the growth of epsilon-neighborhoods of orbits."""

from .errors import EpsOrbitError
from .estimator import (
    OrderReport,
    Thresholds,
    analyze,
    box_dimension,
    classify,
    critical_order,
    differentiation_shift,
)
from .expr import Expression, differentiate, evaluate, log_derivative_range, parse
from .neighborhood import EpsilonProfile, length_at, profile
from .orbit import LazyOrbit, Orbit, generate, import_csv
from .poincare import PlanarField, Section, integrate_to_section, load_field, poincare_orbit
from .scales import ChebyshevScale, jacobian_rank, load_scale

__version__ = "0.1.0"

__all__ = [
    "EpsOrbitError",
    "Expression",
    "parse",
    "evaluate",
    "differentiate",
    "log_derivative_range",
    "ChebyshevScale",
    "load_scale",
    "jacobian_rank",
    "Orbit",
    "LazyOrbit",
    "generate",
    "import_csv",
    "EpsilonProfile",
    "length_at",
    "profile",
    "Thresholds",
    "OrderReport",
    "classify",
    "critical_order",
    "box_dimension",
    "differentiation_shift",
    "analyze",
    "PlanarField",
    "Section",
    "integrate_to_section",
    "poincare_orbit",
    "load_field",
]
