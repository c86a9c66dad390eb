"""
orthoplane - geometric and probabilistic core of orthogonal-plane
self-supervised depth estimation
"""

__version__ = "1.0.0"
