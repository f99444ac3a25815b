"""Conditional CRPS and companion multivariate scoring rules.

Closed-form univariate CRPS kernels, multivariate predictive families with
exact conditionals, multivariate scores (CCRPS, energy, variogram, log),
a small reverse-mode autodiff engine and distributional regression networks.
"""
__version__ = "0.1.0"
