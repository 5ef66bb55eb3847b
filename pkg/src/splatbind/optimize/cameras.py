"""Training-view sampling over the configured orbit ranges."""

from ..core import CameraPose
from .config import StageConfig


def sample_camera(config: StageConfig, rng, width: int = None,
                  height: int = None) -> CameraPose:
    """Uniform pose draw; degenerate ranges pin the coordinate exactly."""
    radius = rng.uniform(*config.radius_range)
    azimuth = rng.uniform(*config.azimuth_range)
    elevation = rng.uniform(*config.elevation_range)
    w = config.render_resolution if width is None else width
    h = w if height is None else height
    return CameraPose.orbit(azimuth_deg=azimuth, elevation_deg=elevation,
                            radius=radius, width=w, height=h,
                            fov_deg=config.fov_deg)
