"""Bayesian mixture-of-models RL agent with live model injection."""

__version__ = "0.1.0"
