"""Public rendering API: tiled forward pass and analytic backward pass.

The backward pass recomputes the forward walk rather than retaining
per-pixel state, reduces per-duplicate gradient slots to fragments in a
fixed order, then chains screen-space gradients through the projection
and the storage activations down to the raw parameter arrays of the
source container. Gradients are taken w.r.t. the color image and
optionally the alpha image; the depth image is a diagnostic output and
carries no gradient.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.types import BoundAsset, RenderTarget
from ..core.cameras import CameraPose
from ..core.rotations import (normalize_vjp, quat_normalize, quat_to_matrix_vjp,
                              rot2d_apply_vjp)
from ..core.barycentric import realize_bound_positions_vjp
from .project import Fragments, project, validate_fragments
from . import kernels


@dataclass
class RenderGradients:
    """Gradients w.r.t. the raw parameter arrays of the source scene.

    Shapes match the container's storage. For bound assets `positions`
    holds the realized per-Gaussian center gradients and `vertices` their
    accumulation onto the mesh vertices; `rotations` is then (N, 2) for
    the in-plane (cos, sin) pairs.
    """

    positions: np.ndarray
    colors: np.ndarray
    opacities: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    vertices: Optional[np.ndarray] = None

    def groups(self) -> dict:
        out = {"positions": self.positions, "colors": self.colors,
               "opacities": self.opacities, "scales": self.scales,
               "rotations": self.rotations}
        if self.vertices is not None:
            out["vertices"] = self.vertices
        return out


def composite(frags: Fragments, background=(0.0, 0.0, 0.0)) -> RenderTarget:
    """Composite fragments front to back over the tile grid."""
    validate_fragments(frags)
    cam = frags.camera
    bg = np.asarray(background, dtype=np.float64)
    if bg.shape != (3,):
        raise ValueError(f"background must be an RGB triple, got shape {bg.shape}")
    h, w = cam.height, cam.width
    if len(frags) == 0:
        color = np.broadcast_to(bg, (h, w, 3)).copy()
        return RenderTarget(color=color, alpha=np.zeros((h, w)),
                            depth=np.zeros((h, w)))
    ntx, nty = kernels.tile_grid(w, h)
    dup, starts = kernels.bin_fragments(frags.rects, w, h)
    if frags.kind == "3d":
        color, alpha, depth_acc, _, _ = kernels.forward_3d(
            frags.means2d, frags.conics, frags.colors, frags.opacities,
            frags.depths, dup, starts, ntx, nty, w, h, bg)
    else:
        fx, fy, cx, cy = cam.intrinsics
        color, alpha, depth_acc, _, _ = kernels.forward_surfel(
            frags.centers_cam, frags.frames_cam, frags.scales2, frags.colors,
            frags.opacities, dup, starts, ntx, nty, w, h,
            fx, fy, cx, cy, cam.near, bg)
    with np.errstate(invalid="ignore", divide="ignore"):
        depth = np.where(alpha > 0.0, depth_acc / alpha, 0.0)
    return RenderTarget(color=color, alpha=alpha, depth=depth)


def render(scene, camera: CameraPose, background=(0.0, 0.0, 0.0)) -> RenderTarget:
    """Project and composite a scene for one camera."""
    return composite(project(scene, camera), background)


def render_backward(scene, camera: CameraPose, grad_color: np.ndarray,
                    grad_alpha: Optional[np.ndarray] = None,
                    background=(0.0, 0.0, 0.0),
                    fragments: Optional[Fragments] = None) -> RenderGradients:
    """Backpropagate image-space gradients to raw scene parameters.

    Args:
        scene: GaussianCloud3D, SurfelCloud2D or BoundAsset.
        camera: the view the gradients refer to.
        grad_color: (H, W, 3) d(loss)/d(color image).
        grad_alpha: optional (H, W) d(loss)/d(alpha image).
        background: RGB triple the forward pass composited over.
        fragments: optionally the fragments from a prior `project` call
            for the same scene and camera, to skip re-projection.
    """
    frags = fragments if fragments is not None else project(scene, camera)
    validate_fragments(frags)
    rs = frags.scene
    cam = frags.camera
    h, w = cam.height, cam.width
    grad_color = np.ascontiguousarray(grad_color, dtype=np.float64)
    if grad_color.shape != (h, w, 3):
        raise ValueError(f"grad_color must have shape ({h}, {w}, 3), "
                         f"got {grad_color.shape}")
    if grad_alpha is None:
        grad_alpha = np.zeros((h, w))
    grad_alpha = np.ascontiguousarray(grad_alpha, dtype=np.float64)
    bg = np.asarray(background, dtype=np.float64)

    src = rs.source
    m = len(frags)
    if m == 0:
        return _zero_gradients(src)

    ntx, nty = kernels.tile_grid(w, h)
    dup, starts = kernels.bin_fragments(frags.rects, w, h)
    if rs.kind == "3d":
        _, _, _, tfinal, ncontrib = kernels.forward_3d(
            frags.means2d, frags.conics, frags.colors, frags.opacities,
            frags.depths, dup, starts, ntx, nty, w, h, bg)
        dd_mean2d, dd_conic, dd_opac, dd_color = kernels.backward_3d(
            frags.means2d, frags.conics, frags.colors, frags.opacities,
            dup, starts, ntx, nty, w, h, bg,
            grad_color, grad_alpha, tfinal, ncontrib)
        d_mean2d = np.zeros((m, 2))
        d_conic = np.zeros((m, 3))
        d_opac = np.zeros(m)
        d_color = np.zeros((m, 3))
        np.add.at(d_mean2d, dup, dd_mean2d)
        np.add.at(d_conic, dup, dd_conic)
        np.add.at(d_opac, dup, dd_opac)
        np.add.at(d_color, dup, dd_color)
        d_mu_w, d_rot_w, d_scale = _chain_projection_3d(
            frags, cam, d_mean2d, d_conic)
    else:
        fx, fy, cx, cy = cam.intrinsics
        _, _, _, tfinal, ncontrib = kernels.forward_surfel(
            frags.centers_cam, frags.frames_cam, frags.scales2, frags.colors,
            frags.opacities, dup, starts, ntx, nty, w, h,
            fx, fy, cx, cy, cam.near, bg)
        dd_center, dd_frame, dd_scale, dd_opac, dd_color = kernels.backward_surfel(
            frags.centers_cam, frags.frames_cam, frags.scales2, frags.colors,
            frags.opacities, dup, starts, ntx, nty, w, h,
            fx, fy, cx, cy, cam.near, bg,
            grad_color, grad_alpha, tfinal, ncontrib)
        d_center = np.zeros((m, 3))
        d_frame = np.zeros((m, 3, 3))
        d_scale = np.zeros((m, 2))
        d_opac = np.zeros(m)
        d_color = np.zeros((m, 3))
        np.add.at(d_center, dup, dd_center)
        np.add.at(d_frame, dup, dd_frame)
        np.add.at(d_scale, dup, dd_scale)
        np.add.at(d_opac, dup, dd_opac)
        np.add.at(d_color, dup, dd_color)
        # camera space -> world space
        d_mu_w = d_center @ cam.rotation
        d_rot_w = np.einsum("ji,njk->nik", cam.rotation, d_frame)

    return _chain_to_source(src, rs, frags, d_mu_w, d_rot_w, d_scale,
                            d_opac, d_color)


def _chain_projection_3d(frags: Fragments, cam: CameraPose,
                         d_mean2d: np.ndarray, d_conic: np.ndarray):
    """Screen-space gradients back to world mean, rotation and scale."""
    rs = frags.scene
    idx = frags.indices
    fx, fy, cx, cy = cam.intrinsics
    t = frags.cam_points
    tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
    m = len(frags)

    rot = rs.rotations[idx]
    s = rs.scales[idx]
    mat = rot * s[:, None, :]
    cov3d = np.einsum("nij,nkj->nik", mat, mat)

    j = np.zeros((m, 2, 3))
    j[:, 0, 0] = fx / tz
    j[:, 0, 2] = -fx * tx / tz ** 2
    j[:, 1, 1] = fy / tz
    j[:, 1, 2] = -fy * ty / tz ** 2
    p23 = np.einsum("nij,jk->nik", j, cam.rotation)

    # conic -> 2D covariance: Q = Sigma^-1, dSigma = -Q dQ Q
    q = np.empty((m, 2, 2))
    q[:, 0, 0] = frags.conics[:, 0]
    q[:, 0, 1] = frags.conics[:, 1]
    q[:, 1, 0] = frags.conics[:, 1]
    q[:, 1, 1] = frags.conics[:, 2]
    dq = np.empty((m, 2, 2))
    dq[:, 0, 0] = d_conic[:, 0]
    dq[:, 0, 1] = 0.5 * d_conic[:, 1]
    dq[:, 1, 0] = 0.5 * d_conic[:, 1]
    dq[:, 1, 1] = d_conic[:, 2]
    d_cov2d = -np.einsum("nij,njk,nkl->nil", q, dq, q)

    d_cov3d = np.einsum("nji,njk,nkl->nil", p23, d_cov2d, p23)
    d_p23 = 2.0 * np.einsum("nij,njk,nkl->nil", d_cov2d, p23, cov3d)
    d_j = np.einsum("nij,kj->nik", d_p23, cam.rotation)

    # screen mean and Jacobian entries as functions of the camera point
    d_t = np.zeros((m, 3))
    d_t[:, 0] = d_mean2d[:, 0] * fx / tz + d_j[:, 0, 2] * (-fx / tz ** 2)
    d_t[:, 1] = d_mean2d[:, 1] * fy / tz + d_j[:, 1, 2] * (-fy / tz ** 2)
    d_t[:, 2] = (-d_mean2d[:, 0] * fx * tx / tz ** 2
                 - d_mean2d[:, 1] * fy * ty / tz ** 2
                 + d_j[:, 0, 0] * (-fx / tz ** 2)
                 + d_j[:, 0, 2] * (2.0 * fx * tx / tz ** 3)
                 + d_j[:, 1, 1] * (-fy / tz ** 2)
                 + d_j[:, 1, 2] * (2.0 * fy * ty / tz ** 3))
    d_mu_w = d_t @ cam.rotation

    # Sigma = M M^T with M = R diag(s)
    d_mat = 2.0 * np.einsum("nij,njk->nik", d_cov3d, mat)
    d_rot_w = d_mat * s[:, None, :]
    d_scale = np.einsum("nij,nij->nj", rot, d_mat)
    return d_mu_w, d_rot_w, d_scale


def _chain_to_source(src, rs, frags: Fragments, d_mu_w, d_rot_w, d_scale,
                     d_opac, d_color) -> RenderGradients:
    """Distribute per-fragment realized gradients to raw parameters."""
    idx = frags.indices
    n = len(rs)

    o = rs.opacities[idx]
    d_opac_logit = d_opac * o * (1.0 - o)
    clamp_mask = ((rs.colors_raw[idx] >= 0.0)
                  & (rs.colors_raw[idx] <= 1.0)).astype(np.float64)
    d_color_raw = d_color * clamp_mask
    d_log_scale = d_scale * rs.scales[idx]

    g_colors = np.zeros_like(src.colors)
    g_opac = np.zeros_like(src.opacities)
    g_scales = np.zeros_like(src.log_scales)
    np.add.at(g_colors, idx, d_color_raw)
    np.add.at(g_opac, idx, d_opac_logit)
    np.add.at(g_scales, idx, d_log_scale)

    if isinstance(src, BoundAsset):
        pairs_raw = src.rotations_2d[idx]
        frames = rs.frames_expanded[idx]
        d_pairs_unit = rot2d_apply_vjp(frames, d_rot_w)
        d_pairs_raw = normalize_vjp(pairs_raw, d_pairs_unit)
        g_rot = np.zeros_like(src.rotations_2d)
        np.add.at(g_rot, idx, d_pairs_raw)
        g_pos = np.zeros((n, 3))
        np.add.at(g_pos, idx, d_mu_w)
        g_verts = realize_bound_positions_vjp(
            src.mesh.faces, src.weights,
            g_pos.reshape(src.mesh.n_faces, src.n_per_face, 3),
            src.mesh.n_vertices)
        return RenderGradients(positions=g_pos, colors=g_colors,
                               opacities=g_opac, scales=g_scales,
                               rotations=g_rot, vertices=g_verts)

    q_raw = src.rotations[idx]
    q_unit = quat_normalize(q_raw)
    d_q_unit = quat_to_matrix_vjp(q_unit, d_rot_w)
    d_q_raw = normalize_vjp(q_raw, d_q_unit)
    g_rot = np.zeros_like(src.rotations)
    np.add.at(g_rot, idx, d_q_raw)
    g_pos = np.zeros_like(src.positions)
    np.add.at(g_pos, idx, d_mu_w)
    return RenderGradients(positions=g_pos, colors=g_colors, opacities=g_opac,
                           scales=g_scales, rotations=g_rot)


def _zero_gradients(src) -> RenderGradients:
    if isinstance(src, BoundAsset):
        return RenderGradients(
            positions=np.zeros((len(src), 3)),
            colors=np.zeros_like(src.colors),
            opacities=np.zeros_like(src.opacities),
            scales=np.zeros_like(src.log_scales),
            rotations=np.zeros_like(src.rotations_2d),
            vertices=np.zeros_like(src.mesh.vertices))
    return RenderGradients(
        positions=np.zeros_like(src.positions),
        colors=np.zeros_like(src.colors),
        opacities=np.zeros_like(src.opacities),
        scales=np.zeros_like(src.log_scales),
        rotations=np.zeros_like(src.rotations))
