from .asset import (bake_free_cloud, build_bound_asset, face_frames,
                    learnable_views, refresh_frames, scale_limits)
from .deform import DeformationPlayer, DeformationStream, pose

__all__ = [
    "DeformationPlayer", "DeformationStream", "bake_free_cloud",
    "build_bound_asset", "face_frames", "learnable_views", "pose",
    "refresh_frames", "scale_limits",
]
