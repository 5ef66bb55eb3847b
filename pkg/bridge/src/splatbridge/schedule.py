"""Noise schedule metadata served to clients at handshake."""

import hashlib

import numpy as np


def linear_alpha_bar(total_steps: int = 1000, beta_start: float = 8.5e-4,
                     beta_end: float = 1.2e-2) -> np.ndarray:
    betas = np.linspace(beta_start, beta_end, total_steps)
    return np.cumprod(1.0 - betas)


def checksum(alpha_bar: np.ndarray) -> str:
    return hashlib.sha256(
        np.asarray(alpha_bar, dtype="<f8").tobytes()).hexdigest()


def table(alpha_bar: np.ndarray) -> dict:
    alpha_bar = np.asarray(alpha_bar, dtype=np.float64)
    return {
        "total_steps": int(alpha_bar.shape[0]),
        "alpha_bar": [float(a) for a in alpha_bar],
        "checksum": checksum(alpha_bar),
    }
