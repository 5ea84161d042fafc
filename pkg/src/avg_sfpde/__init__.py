"""Numerical laboratory for time-averaging of stochastic functional PDEs
with infinite delay and Holder-continuous coefficients."""

__version__ = "0.1.0"
