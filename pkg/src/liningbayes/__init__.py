"""Bayesian identification of earth pressures on tunnel linings."""

__version__ = "0.1.0"
