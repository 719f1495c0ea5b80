"""Stokes graphs of the rotated cubic quadratic differential
-e^{2 i theta} (z - a)(z^2 - 1) dz^2: level sets in the parameter plane,
critical trajectories, domain decomposition and a scanning CLI."""

__version__ = "0.1.0"
