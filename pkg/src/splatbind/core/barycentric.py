"""Barycentric binding of Gaussians to triangle meshes.

Each triangle hosts a fixed template of barycentric weight rows; a bound
Gaussian's center is the weighted sum of its host triangle's vertices.
The map from vertices to centers is linear with constant coefficients, so
the vertex gradient is the same weighted sum applied to center gradients.
"""

import numpy as np

# Row-stochastic templates, one row per Gaussian hosted on a triangle.
_TEMPLATES = {
    1: np.array([[1.0, 1.0, 1.0]]) / 3.0,
    3: np.array([[4.0, 1.0, 1.0],
                 [1.0, 4.0, 1.0],
                 [1.0, 1.0, 4.0]]) / 6.0,
    6: np.array([[8.0, 2.0, 2.0],
                 [2.0, 8.0, 2.0],
                 [2.0, 2.0, 8.0],
                 [2.0, 5.0, 5.0],
                 [5.0, 2.0, 5.0],
                 [5.0, 5.0, 2.0]]) / 12.0,
}


def barycentric_template(n_per_face: int) -> np.ndarray:
    """The (n_per_face, 3) weight template; n_per_face in {1, 3, 6}."""
    if n_per_face not in _TEMPLATES:
        raise ValueError(
            f"n_per_face must be one of {sorted(_TEMPLATES)}, got {n_per_face}")
    return _TEMPLATES[n_per_face].copy()


def realize_bound_positions(vertices: np.ndarray, faces: np.ndarray,
                            weights: np.ndarray) -> np.ndarray:
    """Realize bound Gaussian centers from mesh vertices.

    Args:
        vertices: (V, 3).
        faces: (F, 3) int.
        weights: (N, 3) barycentric template.

    Returns:
        (F * N, 3) centers, face-major order.
    """
    tri = vertices[faces]  # (F, 3, 3)
    pos = np.einsum("nk,fkd->fnd", weights, tri)
    return np.ascontiguousarray(pos.reshape(-1, 3))


def realize_bound_positions_vjp(faces: np.ndarray, weights: np.ndarray,
                                grad_positions: np.ndarray,
                                n_vertices: int) -> np.ndarray:
    """Accumulate center gradients back onto the vertices.

    The binding is linear with the template as constant coefficients, so
    this is exact, not approximate.
    """
    n = weights.shape[0]
    g = np.asarray(grad_positions, dtype=np.float64).reshape(-1, n, 3)
    per_corner = np.einsum("nk,fnd->fkd", weights, g)  # (F, 3, 3)
    out = np.zeros((n_vertices, 3), dtype=np.float64)
    np.add.at(out, faces.reshape(-1), per_corner.reshape(-1, 3))
    return out


def blend_vertex_attributes(values: np.ndarray, faces: np.ndarray,
                            weights: np.ndarray) -> np.ndarray:
    """Blend per-vertex attributes (V, C) to per-Gaussian values (F * N, C)."""
    tri = values[faces]  # (F, 3, C)
    out = np.einsum("nk,fkc->fnc", weights, tri)
    return np.ascontiguousarray(out.reshape(-1, values.shape[1]))


def surfel_to_covariance(log_scales: np.ndarray, rotations: np.ndarray,
                         thickness: float = 0.0) -> np.ndarray:
    """World covariance of surfels, (N, 3, 3).

    A surfel is a degenerate 3D Gaussian: its two tangent extents come from
    log_scales and the extent along the normal (third frame column) is
    `thickness` (zero by default, giving a rank-2 covariance).
    """
    from .rotations import quat_normalize, quat_to_matrix

    rot = quat_to_matrix(quat_normalize(rotations))  # (N, 3, 3)
    s = np.exp(np.asarray(log_scales, dtype=np.float64))  # (N, 2)
    var = np.concatenate([s ** 2, np.full((s.shape[0], 1), thickness ** 2)], axis=1)
    return np.einsum("nik,nk,njk->nij", rot, var, rot)


def flatten_gaussian(log_scales: np.ndarray, rotations: np.ndarray):
    """Flatten 3D Gaussians to surfels by dropping the smallest axis.

    The smallest-scale axis becomes the normal (third frame column); the
    two kept axes preserve their relative order and the frame stays
    right-handed.

    Returns:
        (N, 2) surfel log scales and (N, 4) unit quaternions.
    """
    from .rotations import matrix_to_quat, quat_normalize, quat_to_matrix

    ls = np.asarray(log_scales, dtype=np.float64)
    rot = quat_to_matrix(quat_normalize(rotations))
    n = ls.shape[0]
    out_ls = np.empty((n, 2), dtype=np.float64)
    out_r = np.empty((n, 3, 3), dtype=np.float64)
    drop = np.argmin(ls, axis=1)
    for i in range(n):
        keep = [k for k in range(3) if k != drop[i]]
        out_ls[i] = ls[i, keep]
        out_r[i, :, 0] = rot[i, :, keep[0]]
        out_r[i, :, 1] = rot[i, :, keep[1]]
        out_r[i, :, 2] = np.cross(out_r[i, :, 0], out_r[i, :, 1])
    return out_ls, matrix_to_quat(out_r)
