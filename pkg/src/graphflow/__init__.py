"""Finite-difference nonparametric mean curvature flow for graphs of
f: Omega in R^n -> R^m, with geometric monitors along the flow."""

__version__ = "0.1.0"
