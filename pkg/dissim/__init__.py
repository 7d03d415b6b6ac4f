"""Dissipative Lindbladian simulation and Gibbs coherence amplitude estimation."""

__version__ = "0.1.0"
