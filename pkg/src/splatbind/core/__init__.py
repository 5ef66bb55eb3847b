from .types import (BoundAsset, ColoredMesh, GaussianCloud3D, RenderTarget,
                    SurfelCloud2D, logit, sigmoid)
from .cameras import CameraPose, look_at_rotation, orbit_position
from .rotations import (matrix_to_quat, normalize_vjp, quat_normalize,
                        quat_to_matrix, quat_to_matrix_vjp, rot2d_apply,
                        rot2d_apply_vjp, rot2d_normalize)
from .barycentric import (barycentric_template, blend_vertex_attributes,
                          flatten_gaussian, realize_bound_positions,
                          realize_bound_positions_vjp, surfel_to_covariance)

__all__ = [
    "BoundAsset", "ColoredMesh", "GaussianCloud3D", "RenderTarget",
    "SurfelCloud2D", "logit", "sigmoid", "CameraPose", "look_at_rotation",
    "orbit_position", "matrix_to_quat", "normalize_vjp", "quat_normalize",
    "quat_to_matrix", "quat_to_matrix_vjp", "rot2d_apply", "rot2d_apply_vjp",
    "rot2d_normalize", "barycentric_template", "blend_vertex_attributes",
    "flatten_gaussian", "realize_bound_positions", "realize_bound_positions_vjp",
    "surfel_to_covariance",
]
