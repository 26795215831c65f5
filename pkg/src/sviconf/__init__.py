"""Confidence regions and intervals for box-constrained stochastic variational inequalities."""

__version__ = "0.1.0"
