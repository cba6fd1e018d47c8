"""Dimension-truncation error bounds for g(sum_j x_j xi_j), checked by Monte Carlo."""

__version__ = "0.1.0"
