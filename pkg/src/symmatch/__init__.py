"""Joint self-symmetry detection and non-rigid point-cloud matching.

A PointNet-style encoder maps every point to a k-dimensional canonical
embedding. Pairwise maps and self-symmetry maps (against the reflected
shape) are both read off by nearest-neighbour search in that space.
"""

from ._accel import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
