"""Gaussian entanglement structure of lattice vacuum regions.

Builds covariance matrices for two disjoint regions of the free massive
1D lattice scalar vacuum, concentrates their logarithmic negativity into
mode pairs with a local symplectic transformation, and quantifies the
entanglement hidden by classical noise through Gaussian separability flows.
All numerics run at arbitrary precision.
"""

from .mpnum import PrecisionContext

__all__ = ["PrecisionContext"]
__version__ = "0.1.0"
