"""Reconstruction metrics and loss-curve summaries."""

import numpy as np


def psnr(image: np.ndarray, reference: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1]."""
    image = np.asarray(image, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if image.shape != reference.shape:
        raise ValueError(f"image shape {image.shape} does not match "
                         f"reference shape {reference.shape}")
    mse = float(np.mean((image - reference) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def windowed_means(values, window: int = 100) -> np.ndarray:
    """Mean of consecutive non-overlapping windows (tail partial window kept)."""
    values = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    return np.array([values[i:i + window].mean()
                     for i in range(0, len(values), window)])
