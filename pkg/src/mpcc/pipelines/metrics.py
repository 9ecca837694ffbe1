import math

import numpy as np

from ..errors import DimensionMismatch

PSNR_CAP = 99.99


def mse(original, reconstructed):
    a = np.asarray(original, dtype=np.float64)
    b = np.asarray(reconstructed, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(original, reconstructed, peak=255.0):
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical."""
    err = mse(original, reconstructed)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def psnr_from_mse(err, peak=255.0):
    return math.inf if err == 0 else 10.0 * math.log10(peak * peak / err)


def capped(db):
    """Table value: ``inf`` (and anything above) shown as the 99.99 dB cap."""
    return min(db, PSNR_CAP)
