"""Adjoint resampling pair for rendering finer than the guidance runs.

The render is produced at full resolution, averaged down by blocks for
the provider, and the provider's gradient is carried back up with the
exact transpose of that averaging. The pair satisfies
<down(x), y> == <x, up(y, factor)> to machine precision, which keeps the
chain rule honest.
"""

import numpy as np


def downsample_area(image: np.ndarray, factor: int = 2) -> np.ndarray:
    """Block-mean downsampling over factor x factor tiles."""
    image = np.asarray(image, dtype=np.float64)
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return image.copy()
    h, w = image.shape[:2]
    if h % factor or w % factor:
        raise ValueError(
            f"image size {h}x{w} is not divisible by factor {factor}")
    shaped = image.reshape(h // factor, factor, w // factor, factor,
                           *image.shape[2:])
    return shaped.mean(axis=(1, 3))


def upsample_transpose(grad: np.ndarray, factor: int = 2) -> np.ndarray:
    """Adjoint of downsample_area: spread each value over its block / f^2."""
    grad = np.asarray(grad, dtype=np.float64)
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return grad.copy()
    out = np.repeat(np.repeat(grad, factor, axis=0), factor, axis=1)
    return out / float(factor * factor)
