"""Solver and verification toolkit for 1D heat-conductive compressible
Navier-Stokes in Lagrangian coordinates with far-field vacuum."""

__version__ = "0.1.0"
