"""Numerical lab for first-eigenvalue bounds on compact spacelike
submanifolds of flat Lorentzian space."""

__version__ = "0.1.0"
