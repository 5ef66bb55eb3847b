from .project import (CUTOFF_SIGMA, Fragments, POWER_CUTOFF, RealizedScene,
                      VAR_FLOOR, project, realize_scene, validate_fragments)
from .kernels import ALPHA_MAX, T_STOP, TILE, bin_fragments, tile_grid
from .render import RenderGradients, composite, render, render_backward
from .reference import composite_reference, render_reference

__all__ = [
    "ALPHA_MAX", "CUTOFF_SIGMA", "Fragments", "POWER_CUTOFF", "RealizedScene",
    "RenderGradients", "T_STOP", "TILE", "VAR_FLOOR", "bin_fragments",
    "composite", "composite_reference", "project", "realize_scene", "render",
    "render_backward", "render_reference", "tile_grid", "validate_fragments",
]
