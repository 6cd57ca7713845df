"""Numerics for graphical mean curvature flow: normal-graph geometry, annulus
barriers, a radial solver for complete graphs and the experiments built on them."""

__version__ = "0.1.0"
