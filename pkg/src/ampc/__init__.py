"""Adaptive multi-fidelity polynomial-chaos surrogates for MCMC."""

__version__ = "0.1.0"
