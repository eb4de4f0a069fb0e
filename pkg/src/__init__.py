"""Sampling-Based Stochastic Data-Driven Predictive Control."""

__version__ = "1.0.0"
