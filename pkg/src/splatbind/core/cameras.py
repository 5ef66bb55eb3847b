"""Pinhole cameras on a z-up orbit.

Convention: elevation is the polar angle from +z, so 90 degrees is the
horizontal ring and the turntable lives there; azimuth rotates about +z.
The camera frame is x right, y down, z forward (points in front of the
camera have positive z), principal point at the image center, pixel
centers at half-integer coordinates.
"""

import math
from dataclasses import dataclass

import numpy as np

WORLD_UP = np.array([0.0, 0.0, 1.0])


def orbit_position(azimuth_deg: float, elevation_deg: float, radius: float) -> np.ndarray:
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    return radius * np.array([
        math.sin(el) * math.cos(az),
        math.sin(el) * math.sin(az),
        math.cos(el),
    ])


def look_at_rotation(position: np.ndarray, target: np.ndarray) -> np.ndarray:
    """World-to-camera rotation for a camera at `position` looking at `target`.

    Rows are the camera axes (right, down, forward) in world coordinates.
    """
    forward = np.asarray(target, dtype=np.float64) - np.asarray(position, dtype=np.float64)
    dist = np.linalg.norm(forward)
    if dist < 1e-12:
        raise ValueError("camera position coincides with its target")
    forward = forward / dist
    up = WORLD_UP
    if abs(float(forward @ up)) > 1.0 - 1e-9:
        up = np.array([0.0, 1.0, 0.0])  # looking straight along z; pick another up
    right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.stack([right, down, forward], axis=0)


@dataclass
class CameraPose:
    """Extrinsics plus intrinsics for one view.

    Build orbit cameras with `CameraPose.orbit`; the constructor accepts an
    arbitrary rigid pose for tests and deformation playback.
    """

    position: np.ndarray          # (3,) camera center in world space
    rotation: np.ndarray          # (3, 3) world-to-camera, rows right/down/forward
    width: int
    height: int
    fov_deg: float = 60.0         # vertical field of view
    near: float = 0.01
    azimuth_deg: float | None = None
    elevation_deg: float | None = None
    radius: float | None = None

    def __post_init__(self):
        self.position = np.ascontiguousarray(self.position, dtype=np.float64)
        self.rotation = np.ascontiguousarray(self.rotation, dtype=np.float64)
        if self.position.shape != (3,):
            raise ValueError(f"position must have shape (3,), got {self.position.shape}")
        if self.rotation.shape != (3, 3):
            raise ValueError(f"rotation must have shape (3, 3), got {self.rotation.shape}")
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError(f"fov_deg must lie in (0, 180), got {self.fov_deg}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if self.near <= 0.0:
            raise ValueError("near plane must be positive")
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-6:
            raise ValueError(f"rotation is not orthonormal (max deviation {err:.3e})")

    @classmethod
    def orbit(cls, azimuth_deg: float, elevation_deg: float, radius: float,
              width: int, height: int, fov_deg: float = 60.0,
              near: float = 0.01, target=(0.0, 0.0, 0.0)) -> "CameraPose":
        if radius <= 0.0:
            raise ValueError(f"orbit radius must be positive, got {radius}")
        target = np.asarray(target, dtype=np.float64)
        position = target + orbit_position(azimuth_deg, elevation_deg, radius)
        rotation = look_at_rotation(position, target)
        return cls(position=position, rotation=rotation, width=width, height=height,
                   fov_deg=fov_deg, near=near, azimuth_deg=azimuth_deg,
                   elevation_deg=elevation_deg, radius=radius)

    @property
    def intrinsics(self) -> tuple:
        """(fx, fy, cx, cy) in pixels."""
        f = 0.5 * self.height / math.tan(0.5 * math.radians(self.fov_deg))
        return (f, f, 0.5 * self.width, 0.5 * self.height)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 3) world points into camera coordinates."""
        return (np.asarray(points, dtype=np.float64) - self.position) @ self.rotation.T

    def project(self, points: np.ndarray):
        """Project (N, 3) world points.

        Returns:
            (N, 2) pixel coordinates and (N,) camera-space depths.
        """
        cam = self.world_to_camera(points)
        fx, fy, cx, cy = self.intrinsics
        z = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            px = fx * cam[:, 0] / z + cx
            py = fy * cam[:, 1] / z + cy
        return np.stack([px, py], axis=1), z

    def transformed(self, rot: np.ndarray, trans: np.ndarray) -> "CameraPose":
        """The camera that sees the scene x -> rot @ x + trans unchanged."""
        rot = np.asarray(rot, dtype=np.float64)
        trans = np.asarray(trans, dtype=np.float64)
        return CameraPose(position=rot @ self.position + trans,
                          rotation=self.rotation @ rot.T,
                          width=self.width, height=self.height,
                          fov_deg=self.fov_deg, near=self.near)
