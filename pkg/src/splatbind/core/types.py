"""Scene containers.

All parameter arrays are float64 and stored in raw (pre-activation) form:
opacities as logits, scales as logs, rotations as unnormalized quaternions
or (cos, sin) pairs. Activations are applied when a scene is realized for
rendering, never in storage.
"""

from dataclasses import dataclass

import numpy as np

from .rotations import quat_normalize, rot2d_normalize


def _array(a, name: str, shape_tail: tuple, dtype=np.float64) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    if out.ndim != 1 + len(shape_tail) or out.shape[1:] != shape_tail:
        raise ValueError(
            f"{name} must have shape (N, {', '.join(map(str, shape_tail))}), "
            f"got {out.shape}" if shape_tail else
            f"{name} must have shape (N,), got {out.shape}")
    return out


def _require_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        idx = int(np.argmax(~np.isfinite(a).reshape(a.shape[0], -1).all(axis=1)))
        raise ValueError(f"{name} contains a non-finite value at row {idx}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logit(p: np.ndarray | float) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("logit requires values strictly inside (0, 1)")
    return np.log(p / (1.0 - p))


@dataclass
class GaussianCloud3D:
    """Free 3D Gaussians.

    positions: (N, 3) world centers.
    colors: (N, 3) raw RGB, clamped to [0, 1] at render time.
    opacities: (N,) logits.
    log_scales: (N, 3) log standard deviations per local axis.
    rotations: (N, 4) raw quaternions (w, x, y, z).
    """

    positions: np.ndarray
    colors: np.ndarray
    opacities: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray

    def __post_init__(self):
        self.positions = _array(self.positions, "positions", (3,))
        n = self.positions.shape[0]
        self.colors = _array(self.colors, "colors", (3,))
        self.opacities = _array(self.opacities, "opacities", ())
        self.log_scales = _array(self.log_scales, "log_scales", (3,))
        self.rotations = _array(self.rotations, "rotations", (4,))
        for name in ("colors", "opacities", "log_scales", "rotations"):
            arr = getattr(self, name)
            if arr.shape[0] != n:
                raise ValueError(f"{name} has {arr.shape[0]} rows, expected {n}")
            _require_finite(arr, name)
        _require_finite(self.positions, "positions")
        quat_normalize(self.rotations)  # raises on degenerate rows

    def __len__(self) -> int:
        return self.positions.shape[0]

    def copy(self) -> "GaussianCloud3D":
        return GaussianCloud3D(self.positions.copy(), self.colors.copy(),
                               self.opacities.copy(), self.log_scales.copy(),
                               self.rotations.copy())


@dataclass
class SurfelCloud2D:
    """Flat 2D Gaussians (surfels) embedded in 3D.

    Same storage as GaussianCloud3D except log_scales is (N, 2): the two
    tangent extents. The rotation's third column is the surfel normal.
    """

    positions: np.ndarray
    colors: np.ndarray
    opacities: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray

    def __post_init__(self):
        self.positions = _array(self.positions, "positions", (3,))
        n = self.positions.shape[0]
        self.colors = _array(self.colors, "colors", (3,))
        self.opacities = _array(self.opacities, "opacities", ())
        self.log_scales = _array(self.log_scales, "log_scales", (2,))
        self.rotations = _array(self.rotations, "rotations", (4,))
        for name in ("colors", "opacities", "log_scales", "rotations"):
            arr = getattr(self, name)
            if arr.shape[0] != n:
                raise ValueError(f"{name} has {arr.shape[0]} rows, expected {n}")
            _require_finite(arr, name)
        _require_finite(self.positions, "positions")
        quat_normalize(self.rotations)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def copy(self) -> "SurfelCloud2D":
        return SurfelCloud2D(self.positions.copy(), self.colors.copy(),
                             self.opacities.copy(), self.log_scales.copy(),
                             self.rotations.copy())


@dataclass
class ColoredMesh:
    """Triangle mesh with per-vertex RGB colors in [0, 1]."""

    vertices: np.ndarray   # (V, 3)
    faces: np.ndarray      # (F, 3) int
    colors: np.ndarray     # (V, 3)

    def __post_init__(self):
        self.vertices = _array(self.vertices, "vertices", (3,))
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError(f"faces must have shape (F, 3), got {self.faces.shape}")
        self.colors = _array(self.colors, "colors", (3,))
        if self.colors.shape[0] != self.vertices.shape[0]:
            raise ValueError(
                f"colors has {self.colors.shape[0]} rows, expected "
                f"{self.vertices.shape[0]} (one per vertex)")
        _require_finite(self.vertices, "vertices")
        _require_finite(self.colors, "colors")
        if self.faces.size and (self.faces.min() < 0
                                or self.faces.max() >= self.vertices.shape[0]):
            raise ValueError("faces reference out-of-range vertex indices")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def copy(self) -> "ColoredMesh":
        return ColoredMesh(self.vertices.copy(), self.faces.copy(), self.colors.copy())

    def edge_lengths(self) -> np.ndarray:
        """Per-face edge lengths, shape (F, 3)."""
        v = self.vertices[self.faces]  # (F, 3, 3)
        return np.stack([
            np.linalg.norm(v[:, 1] - v[:, 0], axis=1),
            np.linalg.norm(v[:, 2] - v[:, 1], axis=1),
            np.linalg.norm(v[:, 0] - v[:, 2], axis=1),
        ], axis=1)

    def face_areas(self) -> np.ndarray:
        v = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(
            np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)


@dataclass
class BoundAsset:
    """Gaussians bound to a mesh by fixed barycentric weights.

    Each face hosts n_per_face Gaussians, ordered face-major (Gaussian
    i = face * n_per_face + j). Positions are never stored: they are
    realized from the current vertices through `weights`. `frames` caches
    each face's tangent frame (columns t1, t2, normal); it is asset state,
    refreshed when vertices move, and held constant inside a backward pass
    so vertex gradients stay the plain weight-weighted accumulation of
    position gradients.
    """

    mesh: ColoredMesh
    weights: np.ndarray        # (n_per_face, 3) barycentric template
    colors: np.ndarray         # (F * n_per_face, 3) raw RGB
    opacities: np.ndarray      # (F * n_per_face,) logits
    log_scales: np.ndarray     # (F * n_per_face, 3)
    rotations_2d: np.ndarray   # (F * n_per_face, 2) raw (cos, sin)
    frames: np.ndarray         # (F, 3, 3) cached face frames

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[1] != 3:
            raise ValueError(
                f"weights must have shape (N, 3), got {self.weights.shape}")
        rowsums = self.weights.sum(axis=1)
        if np.any(np.abs(rowsums - 1.0) > 1e-9) or np.any(self.weights < -1e-12):
            raise ValueError("barycentric weights must be nonnegative rows summing to 1")
        m = self.mesh.n_faces * self.n_per_face
        self.colors = _array(self.colors, "colors", (3,))
        self.opacities = _array(self.opacities, "opacities", ())
        self.log_scales = _array(self.log_scales, "log_scales", (3,))
        self.rotations_2d = _array(self.rotations_2d, "rotations_2d", (2,))
        for name in ("colors", "opacities", "log_scales", "rotations_2d"):
            arr = getattr(self, name)
            if arr.shape[0] != m:
                raise ValueError(f"{name} has {arr.shape[0]} rows, expected {m}")
            _require_finite(arr, name)
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        if self.frames.shape != (self.mesh.n_faces, 3, 3):
            raise ValueError(
                f"frames must have shape ({self.mesh.n_faces}, 3, 3), "
                f"got {self.frames.shape}")
        rot2d_normalize(self.rotations_2d)

    @property
    def n_per_face(self) -> int:
        return self.weights.shape[0]

    def __len__(self) -> int:
        return self.mesh.n_faces * self.n_per_face

    def copy(self) -> "BoundAsset":
        return BoundAsset(self.mesh.copy(), self.weights.copy(), self.colors.copy(),
                          self.opacities.copy(), self.log_scales.copy(),
                          self.rotations_2d.copy(), self.frames.copy())


@dataclass
class RenderTarget:
    """Composited output of one render."""

    color: np.ndarray   # (H, W, 3)
    alpha: np.ndarray   # (H, W) accumulated opacity in [0, 1]
    depth: np.ndarray   # (H, W) alpha-weighted mean depth; 0 where nothing hit

    @property
    def shape(self) -> tuple:
        return self.color.shape[:2]
