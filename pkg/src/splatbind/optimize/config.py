"""Stage configuration with the published training settings as defaults."""

from dataclasses import dataclass, field

GUIDANCE_MODES = ("sds", "ism", "photometric")
BINDING_MODES = ("bound", "frozen", "free")


def _power_of_two(n: int) -> bool:
    return n >= 64 and (n & (n - 1)) == 0


@dataclass
class StageConfig:
    """Hyperparameters for one optimization stage.

    The two stages share the shape of this record; stage 1 reads the
    surfel position rate and pruning knobs, stage 2 the vertex rate,
    binding mode and Laplacian weight.
    """

    iterations: int = 5000
    batch_size: int = 4
    render_resolution: int = 1024
    guidance_resolution: int = 512
    radius_range: tuple = (3.5, 5.5)
    azimuth_range: tuple = (-180.0, 180.0)
    elevation_range: tuple = (30.0, 150.0)
    fov_deg: float = 60.0
    lr_position: float = 1.6e-5
    lr_vertex: float = 1.6e-4
    lr_color: float = 5e-3
    lr_opacity: float = 5e-2
    lr_scale: float = 5e-4
    lr_rotation: float = 5e-4
    guidance_mode: str = "sds"
    prompt: str = ""
    cfg_scale: float = 7.5
    t_range: tuple = (0.02, 0.5)
    anneal_t: bool = False
    seed: int = 0
    prune_threshold: float = 0.05
    prune_interval: int = 500
    laplacian_weight: float = 1e-2
    binding_mode: str = "bound"
    n_per_face: int = 3
    grid_resolution: int = 128

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("render_resolution", "guidance_resolution"):
            res = getattr(self, name)
            if not _power_of_two(res):
                raise ValueError(
                    f"{name} must be a power of two >= 64, got {res}")
        if self.render_resolution < self.guidance_resolution:
            raise ValueError("render_resolution must be >= guidance_resolution")
        for name in ("radius_range", "azimuth_range", "elevation_range",
                     "t_range"):
            lo, hi = getattr(self, name)
            if not (lo <= hi):
                raise ValueError(f"{name} is empty: ({lo}, {hi})")
        if self.radius_range[0] <= 0:
            raise ValueError("radius_range must be positive")
        if not (0.0 <= self.t_range[0] and self.t_range[1] <= 1.0):
            raise ValueError(f"t_range must lie in [0, 1], got {self.t_range}")
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError(f"fov_deg must lie in (0, 180), got {self.fov_deg}")
        # rates are nonnegative rather than strictly positive: a zero
        # vertex rate is the documented way to freeze stage-2 geometry
        for name in ("lr_position", "lr_vertex", "lr_color", "lr_opacity",
                     "lr_scale", "lr_rotation"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.guidance_mode not in GUIDANCE_MODES:
            raise ValueError(f"guidance_mode must be one of {GUIDANCE_MODES}, "
                             f"got {self.guidance_mode!r}")
        if self.binding_mode not in BINDING_MODES:
            raise ValueError(f"binding_mode must be one of {BINDING_MODES}, "
                             f"got {self.binding_mode!r}")
        if self.cfg_scale < 0:
            raise ValueError("cfg_scale must be >= 0")
        if self.prune_interval < 1:
            raise ValueError("prune_interval must be >= 1")
        if not (0.0 <= self.prune_threshold < 1.0):
            raise ValueError("prune_threshold must lie in [0, 1)")
        if self.laplacian_weight < 0:
            raise ValueError("laplacian_weight must be >= 0")
        if self.n_per_face not in (1, 3, 6):
            raise ValueError(f"n_per_face must be 1, 3 or 6, got {self.n_per_face}")
        if self.grid_resolution < 8:
            raise ValueError("grid_resolution must be >= 8")

    @property
    def downsample_factor(self) -> int:
        return self.render_resolution // self.guidance_resolution

    def sample_t(self, total_steps: int, rng, progress: float = 0.0) -> int:
        """Draw an integer noise level from the configured range.

        With annealing enabled the upper end decays linearly toward the
        lower end as progress runs 0 -> 1.
        """
        import math

        lo = math.ceil(self.t_range[0] * total_steps)
        hi = math.floor(self.t_range[1] * total_steps)
        lo = min(max(lo, 0), total_steps - 1)
        hi = min(max(hi, lo), total_steps - 1)
        if self.anneal_t:
            hi = lo + int(round((hi - lo) * (1.0 - progress)))
        return int(rng.integers(lo, hi + 1))
