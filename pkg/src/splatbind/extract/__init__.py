from .decimate import decimate
from .grid import IndicatorGrid, build_indicator_grid, grid_frame
from .mesh import (color_vertices, extract_mesh, grid_to_mesh,
                   largest_component, signed_volume)
from .points import OrientedPointSet, check_point_set, surfels_to_points

__all__ = [
    "OrientedPointSet", "IndicatorGrid",
    "surfels_to_points", "check_point_set",
    "grid_frame", "build_indicator_grid", "grid_to_mesh",
    "largest_component", "signed_volume", "decimate",
    "color_vertices", "extract_mesh",
]
