"""Image-space update directions assembled from a noise predictor.

Two assembly rules share the same provider interface: the plain noised
difference (predicted minus injected noise) and the inversion-based rule
that contrasts a conditional prediction at level t with the unconditional
prediction at the lower level s = t - delta that seeded the inversion.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .schedule import NoiseSchedule


@dataclass
class GuidanceUpdate:
    gradient: np.ndarray
    t: int
    s: Optional[int] = None

    def __post_init__(self):
        self.gradient = np.asarray(self.gradient, dtype=np.float64)
        if not np.all(np.isfinite(self.gradient)):
            raise ValueError("guidance update contains non-finite values")

    @property
    def mean_abs(self) -> float:
        return float(np.mean(np.abs(self.gradient)))


def _resolve_weight(schedule: NoiseSchedule, t: int, weight) -> float:
    if weight == "uniform":
        return 1.0
    if weight == "sigma2":
        return 1.0 - float(schedule.alpha_bar[t])
    if callable(weight):
        return float(weight(t))
    return float(weight)


def cfg_combine(cond: np.ndarray, uncond: np.ndarray, scale: float) -> np.ndarray:
    cond = np.asarray(cond, dtype=np.float64)
    uncond = np.asarray(uncond, dtype=np.float64)
    if cond.shape != uncond.shape:
        raise ValueError(
            f"prediction shapes differ: {cond.shape} vs {uncond.shape}")
    return uncond + float(scale) * (cond - uncond)


def add_noise(schedule: NoiseSchedule, image: np.ndarray, t,
              noise: np.ndarray) -> np.ndarray:
    t = schedule.check_level(t)
    image = np.asarray(image, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != image.shape:
        raise ValueError(f"noise shape {noise.shape} != image shape {image.shape}")
    return schedule.signal(t) * image + schedule.sigma(t) * noise


def _predict(provider, image, t, prompt, cfg_scale):
    out = np.asarray(
        provider.predict_noise(image, t, prompt=prompt, cfg_scale=cfg_scale),
        dtype=np.float64)
    if out.shape != image.shape:
        raise ValueError(
            f"provider returned shape {out.shape} for input {image.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("provider returned non-finite predictions")
    return out


def _level_path(s: int, t: int, n_steps: int):
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    levels = np.unique(np.round(np.linspace(s, t, n_steps + 1)).astype(int))
    return [int(v) for v in levels]


def ddim_step(schedule: NoiseSchedule, provider, x_from: np.ndarray,
              level_from: int, level_to: int, prompt: str = "",
              cfg_scale: float = 1.0) -> np.ndarray:
    """One deterministic level change, in either direction."""
    a = schedule.check_level(level_from)
    b = schedule.check_level(level_to)
    eps = _predict(provider, x_from, a, prompt, cfg_scale)
    x0 = (x_from - schedule.sigma(a) * eps) / schedule.signal(a)
    return schedule.signal(b) * x0 + schedule.sigma(b) * eps


def ddim_invert(schedule: NoiseSchedule, provider, x_s: np.ndarray, s,
                delta: int, n_steps: int = 1) -> np.ndarray:
    """Walk x_s up to level t = s + delta with unconditional predictions."""
    s = schedule.check_level(s)
    if delta < 0:
        raise ValueError("delta must be non-negative")
    t = schedule.check_level(s + delta)
    x = np.asarray(x_s, dtype=np.float64)
    path = _level_path(s, t, n_steps)
    for a, b in zip(path[:-1], path[1:]):
        x = ddim_step(schedule, provider, x, a, b)
    return x


def ddim_forward(schedule: NoiseSchedule, provider, x_t: np.ndarray, t,
                 delta: int, n_steps: int = 1) -> np.ndarray:
    """Walk x_t down to level s = t - delta (deterministic denoising)."""
    t = schedule.check_level(t)
    if delta < 0:
        raise ValueError("delta must be non-negative")
    s = schedule.check_level(t - delta)
    x = np.asarray(x_t, dtype=np.float64)
    path = _level_path(s, t, n_steps)[::-1]
    for a, b in zip(path[:-1], path[1:]):
        x = ddim_step(schedule, provider, x, a, b)
    return x


def sds_update(schedule: NoiseSchedule, provider, image: np.ndarray,
               prompt: str, t, noise: np.ndarray, weight="uniform",
               cfg_scale: float = 1.0) -> GuidanceUpdate:
    """w(t) * (predicted noise at level t minus the injected noise)."""
    t = schedule.check_level(t)
    image = np.asarray(image, dtype=np.float64)
    x_t = add_noise(schedule, image, t, noise)
    eps_hat = _predict(provider, x_t, t, prompt, cfg_scale)
    w = _resolve_weight(schedule, t, weight)
    return GuidanceUpdate(gradient=w * (eps_hat - noise), t=t)


def ism_update(schedule: NoiseSchedule, provider, image: np.ndarray,
               prompt: str, t, delta: Optional[int] = None,
               noise: Optional[np.ndarray] = None, rng=None,
               weight="uniform", cfg_scale: float = 1.0,
               n_steps: int = 1) -> GuidanceUpdate:
    """Inversion-based update.

    Noise the image to the lower level s = t - delta, walk it up to t with
    unconditional predictions, then contrast the conditional prediction at
    t against the unconditional one at s.
    """
    t = schedule.check_level(t)
    if delta is None:
        delta = schedule.total_steps // 10
    if delta < 0:
        raise ValueError("delta must be non-negative")
    s = t - delta
    if s < 0:
        raise ValueError(f"lower level t - delta = {s} is negative")
    image = np.asarray(image, dtype=np.float64)
    if noise is None:
        if rng is None:
            raise ValueError("pass either noise or rng")
        noise = rng.standard_normal(image.shape)
    x_s = add_noise(schedule, image, s, noise)
    eps_uncond_s = _predict(provider, x_s, s, "", 1.0)
    x_t = ddim_invert(schedule, provider, x_s, s, delta, n_steps=n_steps)
    eps_cond_t = _predict(provider, x_t, t, prompt, cfg_scale)
    w = _resolve_weight(schedule, t, weight)
    return GuidanceUpdate(gradient=w * (eps_cond_t - eps_uncond_s), t=t, s=s)
