"""Exact diagonalization toolkit for bound states in the continuum of a
Bose-Hubbard chain with a single impurity site."""

__version__ = "0.1.0"
