"""Naive full-image compositor.

Evaluates every fragment at every pixel with no tiling, no coverage
rectangles and no early-out bookkeeping beyond the transmittance stop
itself. Slow but direct; the tiled path must reproduce it to float
tolerance, which is what the equivalence tests check.
"""

import numpy as np

from ..core.types import RenderTarget
from .project import (ALPHA_MAX, Fragments, POWER_CUTOFF, T_STOP, project)


def composite_reference(frags: Fragments, background=(0.0, 0.0, 0.0)) -> RenderTarget:
    cam = frags.camera
    h, w = cam.height, cam.width
    bg = np.asarray(background, dtype=np.float64)
    color = np.zeros((h, w, 3))
    depth_acc = np.zeros((h, w))
    trans = np.ones((h, w))

    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + 0.5
    sy = ys + 0.5

    if frags.kind == "surfel":
        fx, fy, cx, cy = cam.intrinsics
        rx = (sx - cx) / fx
        ry = (sy - cy) / fy

    for i in range(len(frags)):
        if frags.kind == "3d":
            ddx = sx - frags.means2d[i, 0]
            ddy = sy - frags.means2d[i, 1]
            a, b, c = frags.conics[i]
            power = 0.5 * (a * ddx * ddx + c * ddy * ddy) + b * ddx * ddy
            depth_i = frags.depths[i]
        else:
            n = frags.frames_cam[i, :, 2]
            bden = rx * n[0] + ry * n[1] + n[2]
            ok = np.abs(bden) >= 1e-12
            anum = float(frags.centers_cam[i] @ n)
            tau = np.where(ok, anum / np.where(ok, bden, 1.0), np.inf)
            ok &= tau > cam.near
            wx = tau * rx - frags.centers_cam[i, 0]
            wy = tau * ry - frags.centers_cam[i, 1]
            wz = tau - frags.centers_cam[i, 2]
            t1 = frags.frames_cam[i, :, 0]
            t2 = frags.frames_cam[i, :, 1]
            u = (wx * t1[0] + wy * t1[1] + wz * t1[2]) / frags.scales2[i, 0]
            v = (wx * t2[0] + wy * t2[1] + wz * t2[2]) / frags.scales2[i, 1]
            power = np.where(ok, 0.5 * (u * u + v * v), np.inf)
            depth_i = tau

        inside = power <= POWER_CUTOFF
        alpha = np.where(inside,
                         np.minimum(frags.opacities[i] * np.exp(
                             np.where(inside, -power, 0.0)), ALPHA_MAX),
                         0.0)
        active = trans >= T_STOP
        wgt = np.where(active, alpha * trans, 0.0)
        color += frags.colors[i][None, None, :] * wgt[..., None]
        depth_acc += np.where(wgt > 0.0, depth_i * wgt, 0.0)
        trans = np.where(active, trans * (1.0 - alpha), trans)

    color += bg[None, None, :] * trans[..., None]
    alpha_img = 1.0 - trans
    with np.errstate(invalid="ignore", divide="ignore"):
        depth = np.where(alpha_img > 0.0, depth_acc / alpha_img, 0.0)
    return RenderTarget(color=color, alpha=alpha_img, depth=depth)


def render_reference(scene, camera, background=(0.0, 0.0, 0.0)) -> RenderTarget:
    return composite_reference(project(scene, camera), background)
