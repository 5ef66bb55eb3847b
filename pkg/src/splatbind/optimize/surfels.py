"""Surfel-cloud initialization from a coarse mesh."""

import numpy as np
from scipy.spatial import cKDTree

from ..core import SurfelCloud2D, logit, matrix_to_quat

INIT_SCALE_FACTOR = 0.7
INIT_OPACITY = 0.5


def vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted face normals accumulated onto vertices, unit rows.

    A vertex whose incident normals cancel (or that no face touches)
    gets +z so downstream frames stay valid.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    v = vertices[faces]
    fn = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    out = np.zeros_like(vertices)
    for c in range(3):
        np.add.at(out, faces[:, c], fn)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    ok = norms[:, 0] > 1e-12
    out[ok] /= norms[ok]
    out[~ok] = [0.0, 0.0, 1.0]
    return out


def normals_to_quats(normals: np.ndarray) -> np.ndarray:
    """Quaternions whose rotation's third column is the given unit normal."""
    n = np.asarray(normals, dtype=np.float64)
    ref = np.where(np.abs(n[:, :1]) < 0.9,
                   np.tile([1.0, 0.0, 0.0], (len(n), 1)),
                   np.tile([0.0, 1.0, 0.0], (len(n), 1)))
    t1 = np.cross(ref, n)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    return matrix_to_quat(np.stack([t1, t2, n], axis=2))


def init_surfels(vertices: np.ndarray, faces: np.ndarray,
                 colors: np.ndarray = None) -> SurfelCloud2D:
    """One surfel per mesh vertex, facing the local surface normal.

    Colors come from the vertex colors when given, mid-gray otherwise.
    The initial tangent extent is 0.7 times the mean distance to the 3
    nearest other vertices, so the cloud covers the surface without
    immediate overlap saturation; opacity starts at 0.5.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    n = len(vertices)
    if n < 4:
        raise ValueError(f"need at least 4 vertices to size surfels, got {n}")
    if colors is None:
        colors = np.full((n, 3), 0.5)
    dist, _ = cKDTree(vertices).query(vertices, k=4)
    mean3 = np.maximum(dist[:, 1:4].mean(axis=1), 1e-12)
    log_scales = np.log(INIT_SCALE_FACTOR * mean3)
    return SurfelCloud2D(
        positions=vertices.copy(),
        colors=np.asarray(colors, dtype=np.float64).copy(),
        opacities=np.full(n, float(logit(INIT_OPACITY))),
        log_scales=np.repeat(log_scales[:, None], 2, axis=1),
        rotations=normals_to_quats(vertex_normals(vertices, faces)),
    )
