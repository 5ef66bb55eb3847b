"""Quaternion and in-plane rotation utilities.

Quaternions are stored unnormalized (w, x, y, z) and normalized on use.
In-plane rotations for mesh-bound Gaussians are stored as raw (cos, sin)
pairs, likewise normalized on use.
"""

import numpy as np

_NORM_EPS = 1e-12


def quat_normalize(quats: np.ndarray) -> np.ndarray:
    """Normalize quaternions to unit length.

    Args:
        quats: (N, 4) raw quaternions, (w, x, y, z).

    Returns:
        (N, 4) unit quaternions.

    Raises:
        ValueError: if any quaternion has near-zero norm.
    """
    quats = np.asarray(quats, dtype=np.float64)
    norms = np.linalg.norm(quats, axis=-1)
    bad = norms < _NORM_EPS
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise ValueError(f"quaternion {idx} has near-zero norm {norms[idx]:.3e}")
    return quats / norms[..., None]


def quat_to_matrix(quats: np.ndarray) -> np.ndarray:
    """Unit quaternions (N, 4) to rotation matrices (N, 3, 3)."""
    q = np.asarray(quats, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    mats = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    mats[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    mats[..., 0, 1] = 2.0 * (x * y - w * z)
    mats[..., 0, 2] = 2.0 * (x * z + w * y)
    mats[..., 1, 0] = 2.0 * (x * y + w * z)
    mats[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    mats[..., 1, 2] = 2.0 * (y * z - w * x)
    mats[..., 2, 0] = 2.0 * (x * z - w * y)
    mats[..., 2, 1] = 2.0 * (y * z + w * x)
    mats[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return mats


def quat_to_matrix_vjp(quats: np.ndarray, grad_mats: np.ndarray) -> np.ndarray:
    """Backpropagate d/dR through quat_to_matrix.

    Args:
        quats: (N, 4) unit quaternions the matrices were built from.
        grad_mats: (N, 3, 3) gradients w.r.t. the rotation matrices.

    Returns:
        (N, 4) gradients w.r.t. the unit quaternions.
    """
    q = np.asarray(quats, dtype=np.float64)
    g = np.asarray(grad_mats, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]

    # dR/dw
    dw = 2.0 * (
        -z * g[..., 0, 1] + y * g[..., 0, 2]
        + z * g[..., 1, 0] - x * g[..., 1, 2]
        - y * g[..., 2, 0] + x * g[..., 2, 1]
    )
    # dR/dx
    dx = 2.0 * (
        y * g[..., 0, 1] + z * g[..., 0, 2]
        + y * g[..., 1, 0] - 2.0 * x * g[..., 1, 1] - w * g[..., 1, 2]
        + z * g[..., 2, 0] + w * g[..., 2, 1] - 2.0 * x * g[..., 2, 2]
    )
    # dR/dy
    dy = 2.0 * (
        -2.0 * y * g[..., 0, 0] + x * g[..., 0, 1] + w * g[..., 0, 2]
        + x * g[..., 1, 0] + z * g[..., 1, 2]
        - w * g[..., 2, 0] + z * g[..., 2, 1] - 2.0 * y * g[..., 2, 2]
    )
    # dR/dz
    dz = 2.0 * (
        -2.0 * z * g[..., 0, 0] - w * g[..., 0, 1] + x * g[..., 0, 2]
        + w * g[..., 1, 0] - 2.0 * z * g[..., 1, 1] + y * g[..., 1, 2]
        + x * g[..., 2, 0] + y * g[..., 2, 1]
    )
    return np.stack([dw, dx, dy, dz], axis=-1)


def normalize_vjp(raw: np.ndarray, grad_unit: np.ndarray) -> np.ndarray:
    """Backpropagate through v_hat = v / |v| for rows of raw.

    Works for any trailing dimension (quaternions, (cos, sin) pairs).
    """
    raw = np.asarray(raw, dtype=np.float64)
    g = np.asarray(grad_unit, dtype=np.float64)
    norms = np.linalg.norm(raw, axis=-1, keepdims=True)
    unit = raw / norms
    # (I - u u^T) / |v| applied to the gradient
    return (g - unit * np.sum(unit * g, axis=-1, keepdims=True)) / norms


def matrix_to_quat(mats: np.ndarray) -> np.ndarray:
    """Rotation matrices (N, 3, 3) to unit quaternions (N, 4), w >= 0."""
    m = np.asarray(mats, dtype=np.float64)
    n = m.shape[0]
    q = np.empty((n, 4), dtype=np.float64)
    tr = m[:, 0, 0] + m[:, 1, 1] + m[:, 2, 2]
    # Branch per row on the largest diagonal term for stability.
    for i in range(n):
        t = tr[i]
        a = m[i]
        if t > 0.0:
            s = np.sqrt(t + 1.0) * 2.0
            q[i] = (0.25 * s, (a[2, 1] - a[1, 2]) / s,
                    (a[0, 2] - a[2, 0]) / s, (a[1, 0] - a[0, 1]) / s)
        elif a[0, 0] >= a[1, 1] and a[0, 0] >= a[2, 2]:
            s = np.sqrt(1.0 + a[0, 0] - a[1, 1] - a[2, 2]) * 2.0
            q[i] = ((a[2, 1] - a[1, 2]) / s, 0.25 * s,
                    (a[0, 1] + a[1, 0]) / s, (a[0, 2] + a[2, 0]) / s)
        elif a[1, 1] >= a[2, 2]:
            s = np.sqrt(1.0 + a[1, 1] - a[0, 0] - a[2, 2]) * 2.0
            q[i] = ((a[0, 2] - a[2, 0]) / s, (a[0, 1] + a[1, 0]) / s,
                    0.25 * s, (a[1, 2] + a[2, 1]) / s)
        else:
            s = np.sqrt(1.0 + a[2, 2] - a[0, 0] - a[1, 1]) * 2.0
            q[i] = ((a[1, 0] - a[0, 1]) / s, (a[0, 2] + a[2, 0]) / s,
                    (a[1, 2] + a[2, 1]) / s, 0.25 * s)
        if q[i, 0] < 0.0:
            q[i] = -q[i]
    return q


def rot2d_normalize(pairs: np.ndarray) -> np.ndarray:
    """Normalize raw (cos, sin) pairs to the unit circle."""
    pairs = np.asarray(pairs, dtype=np.float64)
    norms = np.linalg.norm(pairs, axis=-1)
    bad = norms < _NORM_EPS
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise ValueError(f"in-plane rotation {idx} has near-zero norm {norms[idx]:.3e}")
    return pairs / norms[..., None]


def rot2d_apply(frames: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Rotate tangent frames about their normal axis.

    Args:
        frames: (N, 3, 3) rotation matrices with columns (t1, t2, normal).
        pairs: (N, 2) unit (cos, sin) pairs.

    Returns:
        (N, 3, 3) rotated frames; the normal column is unchanged.
    """
    c = pairs[:, 0][:, None]
    s = pairs[:, 1][:, None]
    t1 = frames[:, :, 0]
    t2 = frames[:, :, 1]
    out = np.empty_like(frames)
    out[:, :, 0] = c * t1 + s * t2
    out[:, :, 1] = -s * t1 + c * t2
    out[:, :, 2] = frames[:, :, 2]
    return out


def rot2d_apply_vjp(frames: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Gradients of rot2d_apply w.r.t. the unit (cos, sin) pairs.

    The frames are treated as constants.
    """
    t1 = frames[:, :, 0]
    t2 = frames[:, :, 1]
    g1 = grad_out[:, :, 0]
    g2 = grad_out[:, :, 1]
    dc = np.sum(g1 * t1, axis=-1) + np.sum(g2 * t2, axis=-1)
    ds = np.sum(g1 * t2, axis=-1) - np.sum(g2 * t1, axis=-1)
    return np.stack([dc, ds], axis=-1)
