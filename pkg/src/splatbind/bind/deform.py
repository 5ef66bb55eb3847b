"""Deformation of bound assets by vertex streams.

A deformation never touches the per-Gaussian parameters: new vertex
positions move the realized centers through the fixed barycentric
weights, and the tangent frames ride along with the faces. Posing is
therefore exactly "swap the vertices, refresh the frames, realize".
"""

import struct
from dataclasses import dataclass

import numpy as np

from ..core.types import BoundAsset
from .asset import face_frames

MAGIC = b"GDPD"


@dataclass
class DeformationStream:
    """Per-frame vertex positions with timestamps."""

    timestamps: np.ndarray   # (K,)
    vertices: np.ndarray     # (K, V, 3)

    def __post_init__(self):
        self.timestamps = np.ascontiguousarray(self.timestamps, dtype=np.float64)
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        if self.vertices.ndim != 3 or self.vertices.shape[2] != 3:
            raise ValueError(
                f"vertices must have shape (K, V, 3), got {self.vertices.shape}")
        if self.timestamps.shape != (self.vertices.shape[0],):
            raise ValueError("one timestamp per frame required")

    @property
    def n_frames(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[1]

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", self.n_vertices, self.n_frames))
            for k in range(self.n_frames):
                fh.write(struct.pack("<f", float(self.timestamps[k])))
                fh.write(self.vertices[k].astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "DeformationStream":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != MAGIC:
                raise ValueError(f"not a deformation stream (magic {magic!r})")
            n_verts, n_frames = struct.unpack("<II", fh.read(8))
            ts = np.empty(n_frames, dtype=np.float64)
            verts = np.empty((n_frames, n_verts, 3), dtype=np.float64)
            frame_bytes = n_verts * 3 * 4
            for k in range(n_frames):
                raw_t = fh.read(4)
                raw_v = fh.read(frame_bytes)
                if len(raw_t) < 4 or len(raw_v) < frame_bytes:
                    raise ValueError(f"stream truncated at frame {k}")
                ts[k] = struct.unpack("<f", raw_t)[0]
                verts[k] = np.frombuffer(raw_v, dtype="<f4").reshape(n_verts, 3)
        return cls(timestamps=ts, vertices=verts)


def pose(asset: BoundAsset, vertices: np.ndarray,
         previous_frames: np.ndarray | None = None):
    """Pose an asset on new vertices.

    Returns the realized scene (an unbound-equivalent cloud: rendering it
    is the same call the bound render path makes) plus the face frames
    used, so a caller stepping through a stream can carry them into the
    next pose and keep collapsed faces on their last valid rotation.
    """
    from ..rasterizer.project import realize_scene

    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    if vertices.shape != asset.mesh.vertices.shape:
        raise ValueError(
            f"deformed vertices must have shape {asset.mesh.vertices.shape}, "
            f"got {vertices.shape}")
    posed = asset.copy()
    posed.mesh.vertices = vertices
    posed.frames = face_frames(
        vertices, posed.mesh.faces,
        previous=asset.frames if previous_frames is None else previous_frames)
    return realize_scene(posed), posed.frames


class DeformationPlayer:
    """Steps an asset through a stream, carrying frames across poses."""

    def __init__(self, asset: BoundAsset, stream: DeformationStream):
        if stream.n_vertices != asset.mesh.n_vertices:
            raise ValueError(
                f"stream has {stream.n_vertices} vertices, asset has "
                f"{asset.mesh.n_vertices}")
        self.asset = asset
        self.stream = stream
        self._frames = asset.frames

    def __len__(self) -> int:
        return self.stream.n_frames

    def __iter__(self):
        for k in range(self.stream.n_frames):
            scene, self._frames = pose(self.asset, self.stream.vertices[k],
                                       previous_frames=self._frames)
            yield float(self.stream.timestamps[k]), scene
