"""Numerical workbench for spectral and gauge-theoretic objects on flat tori."""

__version__ = "0.1.0"
