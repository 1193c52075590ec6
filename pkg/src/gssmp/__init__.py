"""Simulation and canonicalization of Markov processes with general self-similarity."""
__version__ = "0.1.0"
