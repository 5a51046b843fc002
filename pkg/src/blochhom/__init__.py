"""Bloch-wave homogenization toolkit for kappa^2 Lap^2 - div A(x/eps) grad."""

__version__ = "0.1.0"
