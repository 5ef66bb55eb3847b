"""splatbind: differentiable Gaussian splatting bound to meshes.

The pipeline goes surfels -> mesh -> mesh-bound Gaussians: a surfel scene
is optimized under a guidance signal, a colored mesh is pulled out of it,
and a second optimization drives Gaussians that ride on that mesh through
barycentric weights, so the final asset deforms with its vertices.
"""

from .core import (BoundAsset, CameraPose, ColoredMesh, GaussianCloud3D,
                   RenderTarget, SurfelCloud2D)

__version__ = "0.1.0"

__all__ = [
    "BoundAsset", "CameraPose", "ColoredMesh", "GaussianCloud3D",
    "RenderTarget", "SurfelCloud2D", "__version__",
]
