"""Shapes, file IO, normalization, sampling, reflection and geodesics."""

from .geodesic import DisconnectedGraphError, geodesic_distances, knn_edges, knn_graph_geodesics
from .io import ShapeFormatError, load_shape, read_map, save_shape, write_map
from .ops import flip, flip_x, normalize, restrict_map, restrict_sym_map, sample
from .types import Mesh, PointCloud, PointMap

__all__ = [
    "PointCloud",
    "Mesh",
    "PointMap",
    "load_shape",
    "save_shape",
    "read_map",
    "write_map",
    "ShapeFormatError",
    "normalize",
    "flip",
    "flip_x",
    "sample",
    "restrict_map",
    "restrict_sym_map",
    "geodesic_distances",
    "knn_graph_geodesics",
    "knn_edges",
    "DisconnectedGraphError",
]
