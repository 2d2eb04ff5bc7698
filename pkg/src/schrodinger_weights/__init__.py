"""Weights, maximal operators and fractional integrals adapted to -Laplacian + V on grids."""
__version__ = "0.1.0"
