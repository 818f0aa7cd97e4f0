"""Koebe polyhedra, hyperbolic center fields and Mobius centering."""
