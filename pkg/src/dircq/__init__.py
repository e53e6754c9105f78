"""Exact cone calculus and directional constraint-qualification certificates.

The package decides, with machine-checkable rational certificates, a family
of constraint qualifications for constraint systems g(x) - D with polynomial
g and D a finite union of convex polyhedra, and cross-validates the exact
layer with a floating-point sequence oracle.
"""

__version__ = "0.1.0"
