"""Numerical laboratory for radially nondecreasing solutions of the Neumann
problem -Δ_p u + u^{p-1} = u^{q-1} in the unit ball."""

from .problem import ParameterError, ProblemParams, apriori_bounds, s0, sobolev_critical

__all__ = ["ParameterError", "ProblemParams", "apriori_bounds", "s0", "sobolev_critical"]
__version__ = "0.1.0"
