"""Axisymmetric compressible subsonic jet flows via variational free-boundary minimization."""

__version__ = "0.1.0"
