"""Bound states of point interactions on flat and hyperbolic spaces.

The spectrum of N attractive point interactions is read off the principal
matrix Phi: each negative eigenvalue -nu**2 of the Hamiltonian (or each
energy E in (-m, m) for the relativistic model) is a zero of one of the
monotone eigenvalue branches of Phi.
"""

__version__ = "0.1.0"

from .specfun import DomainError, QuadratureError, QuadratureResult
from .geometry import (
    Configuration,
    ConfigurationError,
    Geometry,
    Kind,
    heat_kernel,
    load_config,
    validate_configuration,
)
from .principal import (
    PrincipalMatrix,
    bare_coupling,
    krein_correction,
    principal_matrix,
    principal_matrix_derivative,
    principal_matrix_oracle,
    resolvent_kernel,
)
from .spectrum import (
    BoundState,
    EigenBranches,
    count_bound_states,
    eigenfunction,
    eigenvalue_branches,
    find_bound_states,
    symmetric_eigen,
)
from .criteria import CriterionReport, applicable_criteria

__all__ = [
    "DomainError", "QuadratureError", "QuadratureResult",
    "Configuration", "ConfigurationError", "Geometry", "Kind", "heat_kernel",
    "load_config", "validate_configuration",
    "PrincipalMatrix", "bare_coupling", "krein_correction", "principal_matrix",
    "principal_matrix_derivative", "principal_matrix_oracle", "resolvent_kernel",
    "BoundState", "EigenBranches", "count_bound_states", "eigenfunction",
    "eigenvalue_branches", "find_bound_states", "symmetric_eigen",
    "CriterionReport", "applicable_criteria",
]
