"""Diffusion noise schedule: cumulative signal levels and their table form."""

import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass
class NoiseSchedule:
    """Discrete noise levels t = 0 .. T-1 with cumulative signal alpha_bar.

    alpha_bar[t] is the squared signal coefficient after t+1 steps; it
    starts near 1 and decreases monotonically. sigma(t) is the matching
    noise coefficient sqrt(1 - alpha_bar[t]).
    """

    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.ascontiguousarray(self.alpha_bar, dtype=np.float64)
        if ab.ndim != 1 or ab.size == 0:
            raise ValueError("alpha_bar must be a non-empty 1d array")
        if not np.all(np.isfinite(ab)):
            raise ValueError("alpha_bar must be finite")
        if np.any(ab <= 0.0) or np.any(ab >= 1.0):
            raise ValueError("alpha_bar values must lie in (0, 1)")
        if np.any(np.diff(ab) >= 0.0):
            raise ValueError("alpha_bar must be strictly decreasing")
        self.alpha_bar = ab

    @classmethod
    def linear(cls, total_steps: int = 1000, beta_start: float = 8.5e-4,
               beta_end: float = 1.2e-2) -> "NoiseSchedule":
        betas = np.linspace(beta_start, beta_end, total_steps)
        return cls(alpha_bar=np.cumprod(1.0 - betas))

    @property
    def total_steps(self) -> int:
        return self.alpha_bar.shape[0]

    def check_level(self, t) -> int:
        t = int(t)
        if not 0 <= t < self.total_steps:
            raise ValueError(
                f"noise level {t} outside schedule range [0, {self.total_steps})")
        return t

    def signal(self, t) -> float:
        """sqrt(alpha_bar_t), the clean-image coefficient."""
        return float(np.sqrt(self.alpha_bar[self.check_level(t)]))

    def sigma(self, t) -> float:
        """sqrt(1 - alpha_bar_t), the noise coefficient."""
        return float(np.sqrt(1.0 - self.alpha_bar[self.check_level(t)]))

    def table(self) -> dict:
        """JSON-ready form exchanged during the remote handshake."""
        return {
            "total_steps": self.total_steps,
            "alpha_bar": [float(a) for a in self.alpha_bar],
            "checksum": self.checksum(),
        }

    def checksum(self) -> str:
        return hashlib.sha256(self.alpha_bar.astype("<f8").tobytes()).hexdigest()

    @classmethod
    def from_table(cls, table: dict) -> "NoiseSchedule":
        sched = cls(alpha_bar=np.asarray(table["alpha_bar"], dtype=np.float64))
        if sched.total_steps != int(table["total_steps"]):
            raise ValueError("schedule table length disagrees with total_steps")
        claimed = table.get("checksum")
        if claimed is not None and claimed != sched.checksum():
            raise ValueError("schedule table checksum mismatch")
        return sched
