"""Pseudo-spectral Euler-Maxwell simulator with Littlewood-Paley diagnostics."""

__version__ = "0.1.0"
