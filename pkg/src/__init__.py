"""Contagion maps and Isomap for manifold learning on networks and point clouds."""

__version__ = "0.1.0"
