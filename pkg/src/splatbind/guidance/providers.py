"""Noise predictors with closed forms, plus the reconstruction oracle.

The analytic providers model data concentrated at a known image (a point
mass, or a Gaussian around it). Their exact posterior noise predictions
make every downstream identity checkable by hand, which is the whole
point: the update assembly and the socket plumbing get tested without any
network in the loop.
"""

from dataclasses import dataclass, field
from typing import Optional, Protocol, runtime_checkable

import numpy as np

from .schedule import NoiseSchedule
from .updates import GuidanceUpdate, cfg_combine


@dataclass
class ScoreRequest:
    image: np.ndarray
    t: int
    prompt: str = ""
    cfg_scale: float = 1.0


@dataclass
class ScoreResponse:
    noise: np.ndarray


@runtime_checkable
class ScoreProvider(Protocol):
    """Anything that predicts the noise inside a noisy image.

    An empty prompt means the unconditional prediction. Implementations
    apply classifier-free mixing themselves when cfg_scale != 1, so the
    caller always receives the final prediction.
    """

    def predict_noise(self, image: np.ndarray, t: int, prompt: str = "",
                      cfg_scale: float = 1.0) -> np.ndarray:
        ...


@dataclass
class PointMassProvider:
    """Exact predictor for data concentrated at a single image.

    With all mass at m, the posterior mean of the injected noise given
    x_t is (x_t - signal(t) * m) / sigma(t). Deterministic level walks
    leave this prediction invariant, so inversion round-trips are exact.
    """

    schedule: NoiseSchedule
    mean_cond: np.ndarray
    mean_uncond: Optional[np.ndarray] = None

    def __post_init__(self):
        self.mean_cond = np.asarray(self.mean_cond, dtype=np.float64)
        if self.mean_uncond is None:
            self.mean_uncond = self.mean_cond
        self.mean_uncond = np.asarray(self.mean_uncond, dtype=np.float64)

    def _single(self, image, t, mean):
        t = self.schedule.check_level(t)
        return (image - self.schedule.signal(t) * mean) / self.schedule.sigma(t)

    def predict_noise(self, image, t, prompt="", cfg_scale=1.0):
        image = np.asarray(image, dtype=np.float64)
        if prompt == "":
            return self._single(image, t, self.mean_uncond)
        cond = self._single(image, t, self.mean_cond)
        if cfg_scale == 1.0:
            return cond
        return cfg_combine(cond, self._single(image, t, self.mean_uncond),
                           cfg_scale)


@dataclass
class GaussianToyProvider:
    """Exact predictor for Gaussian data around a known image.

    Data N(m, gamma^2 I) gives x_t ~ N(signal*m, signal^2 gamma^2 + sigma^2)
    and the posterior noise mean sigma * (x_t - signal*m) / that variance.
    gamma -> 0 recovers the point-mass predictor.
    """

    schedule: NoiseSchedule
    mean_cond: np.ndarray
    gamma: float = 0.25
    mean_uncond: Optional[np.ndarray] = None

    def __post_init__(self):
        self.mean_cond = np.asarray(self.mean_cond, dtype=np.float64)
        if self.mean_uncond is None:
            self.mean_uncond = self.mean_cond
        self.mean_uncond = np.asarray(self.mean_uncond, dtype=np.float64)
        if self.gamma < 0.0:
            raise ValueError("gamma must be non-negative")

    def _single(self, image, t, mean):
        t = self.schedule.check_level(t)
        a = self.schedule.signal(t)
        b = self.schedule.sigma(t)
        var = a * a * self.gamma * self.gamma + b * b
        return b * (image - a * mean) / var

    def predict_noise(self, image, t, prompt="", cfg_scale=1.0):
        image = np.asarray(image, dtype=np.float64)
        if prompt == "":
            return self._single(image, t, self.mean_uncond)
        cond = self._single(image, t, self.mean_cond)
        if cfg_scale == 1.0:
            return cond
        return cfg_combine(cond, self._single(image, t, self.mean_uncond),
                           cfg_scale)


@dataclass
class ConstantOffsetProvider:
    """Wraps a provider so the conditional prediction is uncond + offset."""

    base: ScoreProvider
    offset: float = 0.0

    def predict_noise(self, image, t, prompt="", cfg_scale=1.0):
        uncond = np.asarray(self.base.predict_noise(image, t, prompt="",
                                                    cfg_scale=1.0))
        if prompt == "":
            return uncond
        return cfg_combine(uncond + self.offset, uncond, cfg_scale)


@dataclass
class PhotometricOracle:
    """Reconstruction stand-in: the update pulls straight at a reference.

    references maps a camera key to its ground-truth image. The gradient
    of half the squared error, x - ref, plays the role of the score-based
    update so the full optimization loop can run against a known optimum.
    """

    references: dict = field(default_factory=dict)

    def add(self, key, image) -> None:
        self.references[key] = np.asarray(image, dtype=np.float64)

    def update(self, image: np.ndarray, key) -> GuidanceUpdate:
        if key not in self.references:
            raise ValueError(f"no reference image for camera {key!r}")
        ref = self.references[key]
        image = np.asarray(image, dtype=np.float64)
        if image.shape != ref.shape:
            raise ValueError(
                f"image shape {image.shape} != reference shape {ref.shape}")
        return GuidanceUpdate(gradient=image - ref, t=0)
