"""Blowup certificates and a finite-volume laboratory for the radial relativistic Euler-Poisson system."""

__version__ = "0.1.0"
