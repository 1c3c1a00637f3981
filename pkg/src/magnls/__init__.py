"""Pseudo-spectral simulation of the viscous magnetic nonlinear Schrödinger equation."""

__version__ = "0.1.0"
