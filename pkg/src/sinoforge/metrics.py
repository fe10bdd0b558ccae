"""SSIM and PSNR for [0, 1] grayscale images."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import DimensionError, as_image, check_same_shape

WINDOW = 11
SIGMA = 1.5
C1 = 0.01 ** 2
C2 = 0.03 ** 2
PSNR_CAP = 100.0


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps; the 2-D window is their outer product."""
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    half = len(taps) // 2
    out = ndimage.correlate1d(img, taps, axis=0, mode="constant")
    out = ndimage.correlate1d(out, taps, axis=1, mode="constant")
    return out[half:img.shape[0] - half, half:img.shape[1] - half]


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = as_image(a), as_image(b)
    check_same_shape(a, b)
    if min(a.shape) < WINDOW:
        raise DimensionError(f"image {a.shape} is smaller than the {WINDOW}x{WINDOW} SSIM window")
    taps = gaussian_window()
    mu_a = _filter_valid(a, taps)
    mu_b = _filter_valid(b, taps)
    var_a = _filter_valid(a * a, taps) - mu_a * mu_a
    var_b = _filter_valid(b * b, taps) - mu_b * mu_b
    cov = _filter_valid(a * b, taps) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2)
    den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2)
    return num / den


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), valid positions only."""
    return float(ssim_map(a, b).mean())


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB for unit peak; identical images give ``PSNR_CAP``."""
    a, b = as_image(a), as_image(b)
    check_same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


@dataclass(frozen=True)
class QualityReport:
    ssim: float
    psnr: float

    def line(self) -> str:
        return f"ssim={self.ssim:.6f} psnr={self.psnr:.4f}"


def quality(a: np.ndarray, b: np.ndarray) -> QualityReport:
    return QualityReport(ssim(a, b), psnr(a, b))
