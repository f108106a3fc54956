"""Continuous mean-covariance bandit simulation library."""

__version__ = "0.1.0"
