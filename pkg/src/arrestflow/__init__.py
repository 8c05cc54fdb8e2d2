"""Spectral simulation of planar interfaces moving by curvature, normal growth
and nonlocal interaction, with embeddedness diagnostics."""

__version__ = "0.1.0"
