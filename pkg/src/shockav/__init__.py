"""Finite-volume compressible-flow solver with shock-layer artificial
viscosity, plus the verification harness exercising it."""

__version__ = "0.1.0"
