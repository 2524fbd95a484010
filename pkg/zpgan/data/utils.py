# zpgan/data/utils.py
from typing import Tuple

import numpy as np

from zpgan.core.exceptions import ShapeMismatchError
from zpgan.data.schemas import HEIGHT, WIDTH


def validate_response(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.shape != (HEIGHT, WIDTH):
        raise ShapeMismatchError(f"response must be {HEIGHT}x{WIDTH}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("response contains non-finite pixels")
    if np.any(arr < 0):
        raise ValueError("response contains negative pixels")
    return arr


def intensity(x) -> float:
    """f_in: total pixel sum, accumulated in float64."""
    arr = validate_response(x)
    return float(np.sum(arr, dtype=np.float64))


def find_max_pixel(x) -> Tuple[float, float]:
    # np.argmax returns the first occurrence in row-major order, which is the tie-break we want
    arr = validate_response(x)
    k, l = np.unravel_index(int(np.argmax(arr)), arr.shape)
    return float(k), float(l)


def find_max_pixels(responses: np.ndarray) -> np.ndarray:
    """Batched find_max_pixel: (n, H, W) -> (n, 2) float array of (k, l)."""
    flat = responses.reshape(responses.shape[0], -1)
    idx = np.argmax(flat, axis=1)
    k, l = np.unravel_index(idx, responses.shape[1:])
    return np.stack([k, l], axis=1).astype(np.float64)
