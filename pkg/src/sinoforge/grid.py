"""Image and mask containers, dyadic resampling and gradient filters.

Images are plain 2-D ``float64`` numpy arrays (row = projection angle,
column = detector position). Masks are 2-D ``uint8`` arrays with 1 marking a
known pixel and 0 a missing one. The helpers here validate and coerce those
arrays; everything else in the package operates on them directly.
"""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes do not satisfy an operation's contract."""


def as_image(data, copy: bool = False) -> np.ndarray:
    img = np.array(data, dtype=np.float64) if copy else np.asarray(data, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"image must be 2-D, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionError(f"image must be non-empty, got shape {img.shape}")
    return img


def as_mask(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("mask entries must be 0 or 1")
    return arr.astype(np.uint8)


def check_same_shape(*arrays: np.ndarray) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise DimensionError(f"shape mismatch: {sorted(shapes)}")


def normalize(img: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant image maps to zeros."""
    img = as_image(img)
    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        return np.zeros_like(img)
    return np.clip((img - lo) / (hi - lo), 0.0, 1.0)


def _block(factor: float) -> int:
    if factor not in (0.25, 0.5):
        raise ValueError(f"downsample factor must be 0.25 or 0.5, got {factor}")
    return int(round(1.0 / factor))


def pad_to_multiple(img: np.ndarray, multiple: int) -> tuple[np.ndarray, tuple[int, int]]:
    """Reflect-pad bottom/right so both dimensions divide ``multiple``.

    Returns the padded array and the (rows, cols) padding that was added.
    """
    h, w = img.shape
    pad = ((-h) % multiple, (-w) % multiple)
    return pad_by(img, pad), pad


def pad_by(img: np.ndarray, pad: tuple[int, int]) -> np.ndarray:
    if pad == (0, 0):
        return img
    # reflect is undefined on a 1-pixel axis
    mode = "reflect" if min(img.shape) > 1 else "edge"
    return np.pad(img, ((0, pad[0]), (0, pad[1])), mode=mode)


def downsample(img: np.ndarray, factor: float) -> np.ndarray:
    """Area (mean-pool) downsampling by 0.5 or 0.25.

    Dimensions that are not multiples of the block size are reflect-padded
    first, so the output has ``ceil(factor * dim)`` pixels per axis.
    """
    img = as_image(img)
    k = _block(factor)
    img, _ = pad_to_multiple(img, k)
    h, w = img.shape
    return img.reshape(h // k, k, w // k, k).mean(axis=(1, 3))


def downsample_mask(mask: np.ndarray, factor: float) -> np.ndarray:
    """A coarse pixel is known only when its whole source block is known."""
    mask = as_mask(mask)
    k = _block(factor)
    mask, _ = pad_to_multiple(mask, k)
    h, w = mask.shape
    return mask.reshape(h // k, k, w // k, k).min(axis=(1, 3)).astype(np.uint8)


def upsample_nearest(img: np.ndarray, factor: int) -> np.ndarray:
    img = as_image(img)
    if factor not in (2, 4):
        raise ValueError(f"upsample factor must be 2 or 4, got {factor}")
    return np.repeat(np.repeat(img, factor, axis=0), factor, axis=1)


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    """Gradient magnitude from the unnormalized 3x3 Sobel pair.

    Borders use edge replication.
    """
    img = as_image(img)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise DimensionError(f"image {img.shape} is smaller than the 3x3 Sobel kernel")
    p = np.pad(img, 1, mode="edge")
    # smoothing [1, 2, 1] across, derivative [-1, 0, 1] along
    gx = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:])
    return np.sqrt(gx * gx + gy * gy)


def mean_region_gradient(grad: np.ndarray, region: tuple[int, int, int, int]) -> float:
    """Mean of ``grad`` over the half-open rectangle (row0, row1, col0, col1)."""
    r0, r1, c0, c1 = region
    h, w = grad.shape
    if not (0 <= r0 <= r1 <= h and 0 <= c0 <= c1 <= w):
        raise DimensionError(f"region {region} outside image of shape {grad.shape}")
    if r1 == r0 or c1 == c0:
        raise DimensionError(f"empty region {region}")
    return float(grad[r0:r1, c0:c1].mean())
