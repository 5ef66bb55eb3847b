"""Scene realization and projection to screen-space fragments.

Realization applies the storage activations (sigmoid opacity, exp scale,
normalized rotations, color clamp). Projection transforms realized
primitives into per-view fragments: screen means, inverse 2D covariances
for volumetric Gaussians, camera-space frames for surfels, plus the
conservative pixel rectangles used by the tile binner. Both the tiled
compositor and the naive reference consume the same Fragments object, so
the two can only differ in how they composite.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.types import BoundAsset, GaussianCloud3D, SurfelCloud2D, sigmoid
from ..core.cameras import CameraPose
from ..core.rotations import (quat_normalize, quat_to_matrix, rot2d_apply,
                              rot2d_normalize)
from ..core.barycentric import realize_bound_positions

from .kernels import ALPHA_MAX, POWER_CUTOFF, T_STOP

# A fragment is evaluated only where 0.5 * x^T Sigma^-1 x <= POWER_CUTOFF
# (a 4 sigma contour). The coverage rectangles below are sized to contain
# that contour exactly, which keeps tiled and naive compositing equal.
CUTOFF_SIGMA = 4.0
VAR_FLOOR = 0.3  # pixels^2, added to the projected covariance diagonal


@dataclass
class RealizedScene:
    """Activation-applied view of a scene, ready for projection."""

    kind: str                 # "3d" or "surfel"
    means: np.ndarray         # (N, 3)
    colors_raw: np.ndarray    # (N, 3) pre-clamp
    colors: np.ndarray        # (N, 3) clamped to [0, 1]
    opacities: np.ndarray     # (N,) in (0, 1)
    rotations: np.ndarray     # (N, 3, 3) world frames
    scales: np.ndarray        # (N, 3) for 3d, (N, 2) for surfel
    source: object            # originating container
    frames_expanded: Optional[np.ndarray] = None  # (N, 3, 3), bound assets only

    def __len__(self) -> int:
        return self.means.shape[0]


def realize_scene(scene) -> RealizedScene:
    if isinstance(scene, RealizedScene):
        return scene
    if isinstance(scene, GaussianCloud3D):
        return RealizedScene(
            kind="3d",
            means=scene.positions,
            colors_raw=scene.colors,
            colors=np.clip(scene.colors, 0.0, 1.0),
            opacities=sigmoid(scene.opacities),
            rotations=quat_to_matrix(quat_normalize(scene.rotations)),
            scales=np.exp(scene.log_scales),
            source=scene,
        )
    if isinstance(scene, SurfelCloud2D):
        return RealizedScene(
            kind="surfel",
            means=scene.positions,
            colors_raw=scene.colors,
            colors=np.clip(scene.colors, 0.0, 1.0),
            opacities=sigmoid(scene.opacities),
            rotations=quat_to_matrix(quat_normalize(scene.rotations)),
            scales=np.exp(scene.log_scales),
            source=scene,
        )
    if isinstance(scene, BoundAsset):
        faces_of = np.repeat(np.arange(scene.mesh.n_faces), scene.n_per_face)
        frames = scene.frames[faces_of]  # (N, 3, 3)
        return RealizedScene(
            kind="3d",
            means=realize_bound_positions(scene.mesh.vertices, scene.mesh.faces,
                                          scene.weights),
            colors_raw=scene.colors,
            colors=np.clip(scene.colors, 0.0, 1.0),
            opacities=sigmoid(scene.opacities),
            rotations=rot2d_apply(frames, rot2d_normalize(scene.rotations_2d)),
            scales=np.exp(scene.log_scales),
            source=scene,
            frames_expanded=frames,
        )
    raise TypeError(f"cannot realize scene of type {type(scene).__name__}")


@dataclass
class Fragments:
    """Per-view fragments of the visible primitives, depth sorted."""

    scene: RealizedScene
    camera: CameraPose
    indices: np.ndarray       # (M,) into the realized scene
    depths: np.ndarray        # (M,) camera z of the center
    means2d: np.ndarray       # (M, 2) projected centers, pixels
    rects: np.ndarray         # (M, 4) coverage [x0, x1, y0, y1], pixels
    colors: np.ndarray        # (M, 3) clamped
    opacities: np.ndarray     # (M,)
    # volumetric path
    conics: Optional[np.ndarray] = None      # (M, 3) inverse 2D covariance
    cov2d: Optional[np.ndarray] = None       # (M, 3) upper (a, b, c)
    cam_points: Optional[np.ndarray] = None  # (M, 3)
    # surfel path
    centers_cam: Optional[np.ndarray] = None  # (M, 3)
    frames_cam: Optional[np.ndarray] = None   # (M, 3, 3)
    scales2: Optional[np.ndarray] = None      # (M, 2)

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def kind(self) -> str:
        return self.scene.kind


def _screen_stats(cam_points: np.ndarray, camera: CameraPose):
    fx, fy, cx, cy = camera.intrinsics
    z = cam_points[:, 2]
    px = fx * cam_points[:, 0] / z + cx
    py = fy * cam_points[:, 1] / z + cy
    return np.stack([px, py], axis=1)


def project(scene, camera: CameraPose) -> Fragments:
    """Project a scene into fragments for one camera.

    Culls primitives behind the near plane or fully outside the image and
    sorts the survivors front to back by the camera depth of their center.
    """
    rs = realize_scene(scene)
    if rs.kind == "3d":
        return _project_3d(rs, camera)
    return _project_surfel(rs, camera)


def _project_3d(rs: RealizedScene, camera: CameraPose) -> Fragments:
    n = len(rs)
    cam_pts = camera.world_to_camera(rs.means) if n else np.zeros((0, 3))
    keep = cam_pts[:, 2] > camera.near if n else np.zeros(0, bool)
    idx = np.nonzero(keep)[0]

    cam_pts = cam_pts[idx]
    fx, fy, cx, cy = camera.intrinsics
    tx, ty, tz = cam_pts[:, 0], cam_pts[:, 1], cam_pts[:, 2]
    means2d = np.stack([fx * tx / tz + cx, fy * ty / tz + cy], axis=1)

    # world covariance -> camera plane: P = J @ W per fragment
    rot = rs.rotations[idx]
    s = rs.scales[idx]
    m = rot * s[:, None, :]                      # R diag(s)
    cov3d = np.einsum("nij,nkj->nik", m, m)      # (M, 3, 3)
    j = np.zeros((len(idx), 2, 3))
    j[:, 0, 0] = fx / tz
    j[:, 0, 2] = -fx * tx / tz ** 2
    j[:, 1, 1] = fy / tz
    j[:, 1, 2] = -fy * ty / tz ** 2
    p23 = np.einsum("nij,jk->nik", j, camera.rotation)
    cov2d_full = np.einsum("nij,njk,nlk->nil", p23, cov3d, p23)
    a = cov2d_full[:, 0, 0] + VAR_FLOOR
    b = cov2d_full[:, 0, 1]
    c = cov2d_full[:, 1, 1] + VAR_FLOOR
    det = a * c - b * b
    conic = np.stack([c / det, -b / det, a / det], axis=1)

    half_trace = 0.5 * (a + c)
    lam_max = half_trace + np.sqrt(np.maximum(
        half_trace ** 2 - det, 0.0))
    radius = CUTOFF_SIGMA * np.sqrt(lam_max)
    x0 = np.maximum(means2d[:, 0] - radius, 0.0)
    x1 = np.minimum(means2d[:, 0] + radius, float(camera.width))
    y0 = np.maximum(means2d[:, 1] - radius, 0.0)
    y1 = np.minimum(means2d[:, 1] + radius, float(camera.height))
    visible = (x0 < x1) & (y0 < y1)

    order = np.argsort(tz[visible], kind="stable")
    sel = np.nonzero(visible)[0][order]
    return Fragments(
        scene=rs, camera=camera,
        indices=np.ascontiguousarray(idx[sel]),
        depths=np.ascontiguousarray(tz[sel]),
        means2d=np.ascontiguousarray(means2d[sel]),
        rects=np.ascontiguousarray(np.stack([x0, x1, y0, y1], axis=1)[sel]),
        colors=np.ascontiguousarray(rs.colors[idx[sel]]),
        opacities=np.ascontiguousarray(rs.opacities[idx[sel]]),
        conics=np.ascontiguousarray(conic[sel]),
        cov2d=np.ascontiguousarray(np.stack([a, b, c], axis=1)[sel]),
        cam_points=np.ascontiguousarray(cam_pts[sel]),
    )


def _project_surfel(rs: RealizedScene, camera: CameraPose) -> Fragments:
    n = len(rs)
    cam_pts = camera.world_to_camera(rs.means) if n else np.zeros((0, 3))
    keep = cam_pts[:, 2] > camera.near if n else np.zeros(0, bool)
    idx = np.nonzero(keep)[0]

    centers = cam_pts[idx]                                     # (M, 3)
    frames = np.einsum("ij,njk->nik", camera.rotation, rs.rotations[idx])
    s2 = rs.scales[idx]                                        # (M, 2)
    means2d = _screen_stats(centers, camera)

    # coverage: project the four corners of the +-4 sigma tangent rectangle
    t1 = frames[:, :, 0] * (CUTOFF_SIGMA * s2[:, 0])[:, None]
    t2 = frames[:, :, 1] * (CUTOFF_SIGMA * s2[:, 1])[:, None]
    corners = np.stack([centers + t1 + t2, centers + t1 - t2,
                        centers - t1 + t2, centers - t1 - t2], axis=1)  # (M, 4, 3)
    fx, fy, cx, cy = camera.intrinsics
    cz = corners[:, :, 2]
    safe = np.all(cz > camera.near, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cpx = fx * corners[:, :, 0] / cz + cx
        cpy = fy * corners[:, :, 1] / cz + cy
    x0 = np.where(safe, np.min(cpx, axis=1), 0.0)
    x1 = np.where(safe, np.max(cpx, axis=1), float(camera.width))
    y0 = np.where(safe, np.min(cpy, axis=1), 0.0)
    y1 = np.where(safe, np.max(cpy, axis=1), float(camera.height))
    x0 = np.maximum(x0, 0.0)
    x1 = np.minimum(x1, float(camera.width))
    y0 = np.maximum(y0, 0.0)
    y1 = np.minimum(y1, float(camera.height))
    visible = (x0 < x1) & (y0 < y1)

    order = np.argsort(centers[visible, 2], kind="stable")
    sel = np.nonzero(visible)[0][order]
    return Fragments(
        scene=rs, camera=camera,
        indices=np.ascontiguousarray(idx[sel]),
        depths=np.ascontiguousarray(centers[sel, 2]),
        means2d=np.ascontiguousarray(means2d[sel]),
        rects=np.ascontiguousarray(np.stack([x0, x1, y0, y1], axis=1)[sel]),
        colors=np.ascontiguousarray(rs.colors[idx[sel]]),
        opacities=np.ascontiguousarray(rs.opacities[idx[sel]]),
        centers_cam=np.ascontiguousarray(centers[sel]),
        frames_cam=np.ascontiguousarray(frames[sel]),
        scales2=np.ascontiguousarray(s2[sel]),
    )


def validate_fragments(frags: Fragments) -> None:
    """Raise if any fragment carries non-finite data, naming the source."""
    if len(frags) == 0:
        return
    arrays = [frags.depths, frags.means2d, frags.colors, frags.opacities]
    if frags.kind == "3d":
        arrays += [frags.conics, frags.cov2d, frags.cam_points]
    else:
        arrays += [frags.centers_cam, frags.frames_cam, frags.scales2]
    for arr in arrays:
        flat_ok = np.isfinite(arr.reshape(len(frags), -1)).all(axis=1)
        if not flat_ok.all():
            bad = int(np.argmax(~flat_ok))
            raise ValueError(
                f"non-finite fragment data for source primitive "
                f"{int(frags.indices[bad])}")
