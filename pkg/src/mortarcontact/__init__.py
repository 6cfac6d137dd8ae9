"""Quasi-static frictionless contact between linear-elastic tetrahedral bodies.

Contact is enforced by a barrier potential evaluated on mortar-style
samples (clipped face overlaps, clipped edges and projected vertices) that
live on a designated slave surface.
"""
from ._kernels import backend as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
