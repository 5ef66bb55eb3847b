"""Oriented point sets distilled from a surfel cloud."""

from dataclasses import dataclass

import numpy as np

from ..core import SurfelCloud2D, quat_normalize, quat_to_matrix, sigmoid

MIN_POINTS = 100
COPLANAR_REL_TOL = 1e-6


@dataclass
class OrientedPointSet:
    points: np.ndarray       # (P, 3) surfel centers
    normals: np.ndarray      # (P, 3) unit normals
    confidences: np.ndarray  # (P,) activated opacities

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        self.normals = np.ascontiguousarray(self.normals, dtype=np.float64)
        self.confidences = np.ascontiguousarray(self.confidences,
                                                dtype=np.float64)
        p = self.points.shape[0]
        if self.points.shape != (p, 3) or self.normals.shape != (p, 3):
            raise ValueError("points and normals must both be (P, 3)")
        if self.confidences.shape != (p,):
            raise ValueError("confidences must be (P,)")
        for name, arr in (("points", self.points), ("normals", self.normals),
                          ("confidences", self.confidences)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        norms = np.linalg.norm(self.normals, axis=1)
        if p and np.max(np.abs(norms - 1.0)) > 1e-6:
            raise ValueError("normals must be unit length")
        if np.any(self.confidences < 0.0):
            raise ValueError("confidences must be non-negative")

    def __len__(self) -> int:
        return self.points.shape[0]


def surfels_to_points(surfels: SurfelCloud2D,
                      opacity_threshold: float = 0.05) -> OrientedPointSet:
    """Centers, plane normals, and opacities of the retained surfels."""
    opacities = sigmoid(surfels.opacities)
    keep = opacities >= opacity_threshold
    frames = quat_to_matrix(quat_normalize(surfels.rotations[keep]))
    return OrientedPointSet(points=surfels.positions[keep],
                            normals=frames[:, :, 2],
                            confidences=opacities[keep])


def check_point_set(points: np.ndarray,
                    min_points: int = MIN_POINTS) -> None:
    """Reject point arrays that cannot support a surface reconstruction."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < min_points:
        raise ValueError(
            f"{len(points)} oriented points, need at least {min_points}")
    centered = points - points.mean(axis=0)
    extent = np.linalg.norm(points.max(axis=0) - points.min(axis=0))
    cov = centered.T @ centered / len(points)
    thickness = float(np.sqrt(max(np.linalg.eigvalsh(cov)[0], 0.0)))
    if thickness <= COPLANAR_REL_TOL * max(extent, 1e-300):
        raise ValueError("oriented points are coplanar, no enclosed volume")
