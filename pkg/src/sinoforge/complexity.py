"""Patch complexity scores and the sigmoid step allocator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import as_image

DEFAULT_BINS = 256


def shannon_entropy(patch: np.ndarray, bins: int = DEFAULT_BINS) -> float:
    """Entropy in nats of the intensity histogram over [0, 1].

    Bins are equal-width; the last one is closed on the right so 1.0 lands
    in it. Values outside [0, 1] are clamped first.
    """
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    values = np.clip(as_image(patch), 0.0, 1.0).ravel()
    counts, _ = np.histogram(values, bins=bins, range=(0.0, 1.0))
    p = counts[counts > 0] / values.size
    return float(-(p * np.log(p)).sum())


def spectral_l1(patch: np.ndarray) -> float:
    """Sum of DFT magnitudes (unnormalized transform)."""
    return float(np.abs(np.fft.fft2(as_image(patch))).sum())


@dataclass(frozen=True)
class ComplexityScore:
    entropy: float
    spectral_l1: float
    kappa: float


def kappa(patch: np.ndarray, bins: int = DEFAULT_BINS) -> ComplexityScore:
    h = shannon_entropy(patch, bins)
    l1 = spectral_l1(patch)
    return ComplexityScore(h, l1, h + math.log1p(l1))


@dataclass(frozen=True)
class StepAllocation:
    per_patch_steps: list[int]
    s_min: int
    s_max: int
    mu: float


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so large |z| never overflows exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def allocate_steps(kappas, s_min: int = 10, s_max: int = 50, normalize: bool = False) -> StepAllocation:
    """steps_i = floor(s_min + (s_max - s_min) * sigmoid(kappa_i - mean)).

    ``normalize`` divides the centred scores by their standard deviation
    before the sigmoid (off by default).
    """
    k = np.asarray(list(kappas), dtype=np.float64)
    if k.size == 0:
        raise ValueError("cannot allocate steps for an empty patch list")
    if not 1 <= s_min <= s_max:
        raise ValueError(f"need 1 <= s_min <= s_max, got {s_min}, {s_max}")
    mu = float(k.mean())
    z = k - mu
    if normalize:
        sd = float(k.std())
        if sd > 0:
            z = z / sd
    steps = np.floor(s_min + (s_max - s_min) * _sigmoid(z)).astype(int)
    steps = np.clip(steps, s_min, s_max)
    return StepAllocation([int(s) for s in steps], int(s_min), int(s_max), mu)
