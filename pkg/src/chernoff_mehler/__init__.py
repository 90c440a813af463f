"""Chernoff product approximations of Levy-driven SDE semigroups.

One step of the scheme moves a point along a flow psi_h and adds an
independent increment drawn from mu_h; iterating k times with h = t/k
approximates E f(X_t^x) for dX = F(X) dt + dY.
"""
from .engine import GridFunction, GridSpec, TransitionConfig, chernoff_iterate, transition_apply
from .errors import ChernoffError, ConfigError, DomainError, NumericalError, SolverError, UnsupportedModeError
from .flows import ButcherTableau, FlowFamily
from .measures import MeasureFamily, TruncatedMoments
from .reports import ConditionReport

__all__ = [
    "ButcherTableau", "ChernoffError", "ConditionReport", "ConfigError", "DomainError", "FlowFamily",
    "GridFunction", "GridSpec", "MeasureFamily", "NumericalError", "SolverError", "TransitionConfig",
    "TruncatedMoments", "UnsupportedModeError", "chernoff_iterate", "transition_apply",
]
