"""Shared fixtures and independent oracles used across the test suite.

The oracles here deliberately avoid the library's own code paths: the
barycentric solver goes through a least-squares solve, the flat-shade
renderer is a plain z-buffer rasterizer, finite differences drive every
gradient check.
"""

import numpy as np


def solve_barycentric(point: np.ndarray, triangle: np.ndarray) -> np.ndarray:
    """Recover barycentric coordinates of an in-plane point.

    Solves the affine system with lstsq; independent of any library code.
    """
    a = np.vstack([triangle.T, np.ones(3)])  # 4 x 3
    b = np.concatenate([point, [1.0]])
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return sol


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotation matrix via QR."""
    m = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(m)
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def icosphere(subdivisions: int = 2, radius: float = 1.0):
    """Vertices and faces of a subdivided icosahedron (unit sphere)."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    for _ in range(subdivisions):
        edge_mid = {}
        new_faces = []
        verts = list(map(np.asarray, verts))

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in edge_mid:
                m = verts[i] + verts[j]
                m = m / np.linalg.norm(m)
                verts.append(m)
                edge_mid[key] = len(verts) - 1
            return edge_mid[key]

        for f in faces:
            a, b, c = (int(v) for v in f)
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new_faces, dtype=np.int64)
        verts = np.array(verts, dtype=np.float64)
    return np.asarray(verts) * radius, faces


def flat_shade(vertices, faces, vertex_colors, camera, background=(0.0, 0.0, 0.0)):
    """Z-buffer rasterizer with barycentric color interpolation.

    Slow and simple: used only as an oracle for bound-asset init renders.
    """
    h, w = camera.height, camera.width
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = np.asarray(background, dtype=np.float64)
    zbuf = np.full((h, w), np.inf)
    cam_pts = camera.world_to_camera(vertices)
    fx, fy, cx, cy = camera.intrinsics
    for f in faces:
        tri_cam = cam_pts[f]
        if np.any(tri_cam[:, 2] <= camera.near):
            continue
        px = fx * tri_cam[:, 0] / tri_cam[:, 2] + cx
        py = fy * tri_cam[:, 1] / tri_cam[:, 2] + cy
        xs = np.clip([np.floor(px.min()), np.ceil(px.max())], 0, w).astype(int)
        ys = np.clip([np.floor(py.min()), np.ceil(py.max())], 0, h).astype(int)
        if xs[0] >= xs[1] or ys[0] >= ys[1]:
            continue
        area = ((px[1] - px[0]) * (py[2] - py[0])
                - (px[2] - px[0]) * (py[1] - py[0]))
        if abs(area) < 1e-12:
            continue
        cols = vertex_colors[f]
        for yy in range(ys[0], ys[1]):
            for xx in range(xs[0], xs[1]):
                sx, sy = xx + 0.5, yy + 0.5
                w0 = ((px[1] - sx) * (py[2] - sy) - (px[2] - sx) * (py[1] - sy)) / area
                w1 = ((px[2] - sx) * (py[0] - sy) - (px[0] - sx) * (py[2] - sy)) / area
                w2 = 1.0 - w0 - w1
                if w0 < 0 or w1 < 0 or w2 < 0:
                    continue
                z = w0 * tri_cam[0, 2] + w1 * tri_cam[1, 2] + w2 * tri_cam[2, 2]
                if z < zbuf[yy, xx]:
                    zbuf[yy, xx] = z
                    img[yy, xx] = w0 * cols[0] + w1 * cols[1] + w2 * cols[2]
    return img


def finite_difference(fn, x0: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar function over a flat vector."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    flat = x0.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = fn(x0)
        flat[i] = orig - h
        fm = fn(x0)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def group_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


# ---------------------------------------------------------------------------
# gradient-check scene generators
#
# Central differences measure nothing across a discontinuity, and the
# forward model has four genuine ones: the 4 sigma evaluation cutoff, the
# 0.99 alpha clamp, the [0, 1] color clamp and the 1e-4 transmittance
# stop. The scenes below keep every primitive inside the smooth regime:
# few fragments with opacity at most 0.5 (the transmittance never reaches
# the stop), colors strictly inside (0, 1), footprints wide enough that
# the cutoff contour stays clear of the image, and surfel normals within
# 30 degrees of the view axis so ray-plane intersections stay tame.


def tilted_facing_quats(rng, n, camera, max_tilt_deg=30.0):
    """Quaternions whose third axis points roughly at the camera."""
    from splatbind.core import matrix_to_quat

    base_n = -camera.rotation[2]
    aux = np.array([1.0, 0.0, 0.0])
    if abs(base_n @ aux) > 0.9:
        aux = np.array([0.0, 1.0, 0.0])
    t1 = np.cross(base_n, aux)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(base_n, t1)
    mats = []
    for _ in range(n):
        ang = np.radians(rng.uniform(0.0, max_tilt_deg))
        ax = rng.standard_normal(3)
        ax /= np.linalg.norm(ax)
        k = np.array([[0.0, -ax[2], ax[1]],
                      [ax[2], 0.0, -ax[0]],
                      [-ax[1], ax[0], 0.0]])
        rot = np.eye(3) + np.sin(ang) * k + (1.0 - np.cos(ang)) * (k @ k)
        mats.append(rot @ np.stack([t1, t2, base_n], axis=1))
    return matrix_to_quat(np.stack(mats))


def gradient_scene_3d(rng, n=8):
    from splatbind.core import GaussianCloud3D, logit

    return GaussianCloud3D(
        positions=rng.uniform(-0.4, 0.4, (n, 3)),
        colors=rng.uniform(0.2, 0.8, (n, 3)),
        opacities=logit(rng.uniform(0.15, 0.5, n)),
        log_scales=np.log(rng.uniform(1.0, 1.6, (n, 3))),
        rotations=rng.standard_normal((n, 4)),
    )


def gradient_scene_surfel(rng, camera, n=8):
    from splatbind.core import SurfelCloud2D, logit

    return SurfelCloud2D(
        positions=rng.uniform(-0.4, 0.4, (n, 3)),
        colors=rng.uniform(0.2, 0.8, (n, 3)),
        opacities=logit(rng.uniform(0.15, 0.5, n)),
        log_scales=np.log(rng.uniform(1.0, 1.6, (n, 2))),
        rotations=tilted_facing_quats(rng, n, camera),
    )


def gradient_scene_bound(rng, n_per_face=1):
    """Bound asset on an icosahedron with fat, overlapping Gaussians."""
    from splatbind.core import ColoredMesh, logit
    from splatbind.bind import build_bound_asset

    verts, faces = icosphere(0, radius=1.2)
    mesh = ColoredMesh(verts, faces, rng.uniform(0.2, 0.8, (len(verts), 3)))
    asset = build_bound_asset(mesh, n_per_face=n_per_face)
    m = len(asset)
    asset.colors = rng.uniform(0.2, 0.8, (m, 3))
    # 20 fat overlapping fragments: keep alpha low enough that the
    # transmittance never crosses the early-stop threshold
    asset.opacities = logit(rng.uniform(0.1, 0.25, m))
    asset.log_scales = np.log(rng.uniform(1.0, 1.5, (m, 3)))
    pairs = rng.standard_normal((m, 2))
    asset.rotations_2d = pairs / np.linalg.norm(pairs, axis=1, keepdims=True)
    return asset


def gradient_camera(width=32, height=32):
    from splatbind.core import CameraPose

    return CameraPose.orbit(azimuth_deg=25.0, elevation_deg=75.0, radius=4.0,
                            width=width, height=height)
