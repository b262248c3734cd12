"""Greedy, random and classical Broyden solvers with convergence-bound audits."""
__version__ = "0.1.0"
