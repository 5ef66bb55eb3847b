"""Building and maintaining mesh-bound Gaussian assets.

The asset stores one tangent frame per face as explicit state. Frames are
refreshed whenever vertices move (construction, deformation, each
optimizer step); within a single backward pass they are constants, which
keeps the vertex gradient the plain barycentric accumulation of center
gradients. A face that degenerates during animation keeps its last valid
frame so its Gaussians neither vanish nor spin.
"""

import logging

import numpy as np

from ..core.types import BoundAsset, ColoredMesh, GaussianCloud3D, logit
from ..core.barycentric import barycentric_template, blend_vertex_attributes
from ..core.rotations import matrix_to_quat

logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


def face_frames(vertices: np.ndarray, faces: np.ndarray,
                previous: np.ndarray | None = None) -> np.ndarray:
    """Tangent frames per face: columns (t1, t2, normal).

    t1 follows the first edge; a degenerate face falls back to the
    matching row of `previous` (or identity when there is none).
    """
    v = vertices[faces]  # (F, 3, 3)
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    normal = np.cross(e1, e2)
    n_len = np.linalg.norm(normal, axis=1)
    e1_len = np.linalg.norm(e1, axis=1)
    good = (n_len > 2.0 * DEGENERATE_AREA) & (e1_len > 1e-12)

    f = faces.shape[0]
    frames = np.empty((f, 3, 3), dtype=np.float64)
    if previous is not None:
        frames[:] = previous
    else:
        frames[:] = np.eye(3)
    if np.any(good):
        t1 = e1[good] / e1_len[good][:, None]
        n = normal[good] / n_len[good][:, None]
        t2 = np.cross(n, t1)
        frames[good, :, 0] = t1
        frames[good, :, 1] = t2
        frames[good, :, 2] = n
    return frames


def build_bound_asset(mesh: ColoredMesh, n_per_face: int = 3,
                      init_opacity: float = 0.9,
                      scale_factor: float = 0.5,
                      thin_factor: float = 0.1) -> BoundAsset:
    """Attach a fresh set of Gaussians to a mesh.

    Per-Gaussian init: color blended from the host triangle's vertex
    colors through the barycentric template, opacity `init_opacity`,
    in-plane rotation aligned with the first edge, tangent scales
    isotropic at `scale_factor` times the host's mean edge length and the
    normal axis thinner by `thin_factor`.
    """
    if mesh.n_faces == 0:
        raise ValueError("mesh has no faces to host Gaussians")
    areas = mesh.face_areas()
    bbox = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)
    scale_ref = float(np.max(bbox)) if mesh.n_vertices else 1.0
    norm_areas = areas / max(scale_ref ** 2, 1e-300)
    degenerate = norm_areas <= DEGENERATE_AREA
    if degenerate.any():
        frac = float(degenerate.mean())
        if frac > 0.5:
            raise ValueError(
                f"{frac:.0%} of faces are degenerate; refusing to bind")
        logger.warning("binding over %d degenerate faces (of %d); their "
                       "Gaussians start invisible", int(degenerate.sum()),
                       mesh.n_faces)

    weights = barycentric_template(n_per_face)
    f = mesh.n_faces
    colors = blend_vertex_attributes(mesh.colors, mesh.faces, weights)

    mean_edge = mesh.edge_lengths().mean(axis=1)  # (F,)
    mean_edge = np.maximum(mean_edge, 1e-12)
    tangent = scale_factor * mean_edge
    log_scales = np.log(np.stack([tangent, tangent, thin_factor * tangent],
                                 axis=1))
    log_scales = np.repeat(log_scales, n_per_face, axis=0)

    opacities = np.full(f * n_per_face, logit(init_opacity))
    # start invisible on degenerate hosts
    opacities[np.repeat(degenerate, n_per_face)] = logit(1e-4)
    rotations_2d = np.tile([1.0, 0.0], (f * n_per_face, 1))

    return BoundAsset(mesh=mesh, weights=weights, colors=colors,
                      opacities=opacities, log_scales=log_scales,
                      rotations_2d=rotations_2d,
                      frames=face_frames(mesh.vertices, mesh.faces))


def refresh_frames(asset: BoundAsset) -> None:
    """Recompute face frames from the current vertices, in place."""
    asset.frames = face_frames(asset.mesh.vertices, asset.mesh.faces,
                               previous=asset.frames)


def scale_limits(asset: BoundAsset) -> np.ndarray:
    """Per-Gaussian log-scale upper bound: twice the host mean edge."""
    mean_edge = np.maximum(asset.mesh.edge_lengths().mean(axis=1), 1e-12)
    return np.repeat(np.log(2.0 * mean_edge), asset.n_per_face)


def learnable_views(asset: BoundAsset) -> dict:
    """Named views of the optimizable arrays (shared memory, not copies)."""
    return {
        "vertices": asset.mesh.vertices,
        "colors": asset.colors,
        "opacities": asset.opacities,
        "scales": asset.log_scales,
        "rotations": asset.rotations_2d,
    }


def bake_free_cloud(asset: BoundAsset) -> GaussianCloud3D:
    """Snapshot the asset as an unbound cloud (for export and ablations)."""
    from ..rasterizer.project import realize_scene

    rs = realize_scene(asset)
    return GaussianCloud3D(
        positions=rs.means.copy(),
        colors=asset.colors.copy(),
        opacities=asset.opacities.copy(),
        log_scales=asset.log_scales.copy(),
        rotations=matrix_to_quat(rs.rotations),
    )
