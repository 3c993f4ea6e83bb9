"""Spectral engine for Schrodinger operators with periodic 2x2 matrix potentials."""
__version__ = "0.1.0"
