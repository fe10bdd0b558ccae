"""Independent brute-force reference implementations used across the suite.

These are deliberately naive (explicit loops, textbook formulas) so they do
not share code paths with the package under test.
"""

import cmath
import math

import numpy as np
import pytest

from sinoforge.spectral import clear_background_cache


@pytest.fixture(autouse=True)
def _fresh_background_cache():
    clear_background_cache()
    yield
    clear_background_cache()


def brute_dft2(x):
    """O(n^4) 2-D DFT by direct summation, unnormalized, DC at (0, 0)."""
    x = np.asarray(x, dtype=float)
    h, w = x.shape
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            acc = 0j
            for r in range(h):
                for c in range(w):
                    acc += x[r, c] * cmath.exp(-2j * math.pi * (u * r / h + v * c / w))
            out[u, v] = acc
    return out


def brute_gamma(x, fraction=2.0 / 3.0):
    """High-band energy share, DC excluded from the total, by explicit bin loop."""
    F = brute_dft2(x)
    h, w = F.shape
    high = total = 0.0
    for u in range(h):
        for v in range(w):
            e = abs(F[u, v]) ** 2
            if u == 0 and v == 0:
                continue
            total += e
            fu = min(u, h - u) / (h / 2)
            fv = min(v, w - v) / (w / 2)
            if max(fu, fv) > fraction:
                high += e
    return 0.0 if total == 0 else high / total


def brute_entropy(x, bins=256):
    counts = [0] * bins
    flat = [min(max(float(v), 0.0), 1.0) for v in np.ravel(x)]
    for v in flat:
        counts[min(int(v * bins), bins - 1)] += 1
    n = len(flat)
    return -sum(c / n * math.log(c / n) for c in counts if c)


def brute_sobel(img):
    """Direct 3x3 correlation with the unnormalized Sobel pair, edge-replicated border."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    ky = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            gx = gy = 0.0
            for i in range(3):
                for j in range(3):
                    v = img[min(max(r + i - 1, 0), h - 1), min(max(c + j - 1, 0), w - 1)]
                    gx += kx[i][j] * v
                    gy += ky[i][j] * v
            out[r, c] = math.hypot(gx, gy)
    return out


def flat_row_case(size=384, flat_fraction=0.4, ratio=0.8, seed=3):
    """Phantom sinogram whose first rows are zeroed (spectrally flat background)."""
    from sinoforge.tomo import random_angle_mask, synthetic_sinogram

    gt = synthetic_sinogram(size, size).sinogram.copy()
    gt[: int(flat_fraction * size)] = 0.0
    mask = random_angle_mask(size, ratio, seed, size)
    return gt, mask
