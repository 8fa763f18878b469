"""Regularized solvers for stationary MFG systems with nonsmooth Hamiltonians."""

__version__ = "0.1.0"
