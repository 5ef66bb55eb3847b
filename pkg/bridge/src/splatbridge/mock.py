"""Weightless stand-in model for protocol work.

encode and decode echo their input bit-exactly, and predict_noise draws
pseudo-noise from a hash of the request, so identical requests always
get identical responses and nothing here needs a checkpoint.
"""

import hashlib

import numpy as np

from .schedule import linear_alpha_bar


class MockModel:
    name = "mock"

    def __init__(self, total_steps: int = 1000):
        self.alpha_bar = linear_alpha_bar(total_steps)

    @property
    def total_steps(self) -> int:
        return self.alpha_bar.shape[0]

    def encode(self, image: np.ndarray) -> np.ndarray:
        return image

    def decode(self, latent: np.ndarray) -> np.ndarray:
        return latent

    def _noise(self, x: np.ndarray, t: int, prompt: str) -> np.ndarray:
        key = hashlib.sha256()
        key.update(np.ascontiguousarray(x, dtype="<f4").tobytes())
        key.update(str(int(t)).encode())
        key.update(prompt.encode("utf-8"))
        seed = int.from_bytes(key.digest()[:8], "little")
        rng = np.random.default_rng(seed)
        return rng.standard_normal(x.shape)

    def predict_noise(self, x: np.ndarray, t: int, prompt: str = "",
                      cfg: float = 1.0) -> np.ndarray:
        cond = self._noise(x, t, prompt)
        if cfg == 1.0 or prompt == "":
            return cond
        uncond = self._noise(x, t, "")
        return uncond + cfg * (cond - uncond)
