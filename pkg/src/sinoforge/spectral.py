"""Frequency-domain patch analysis and the skipped-patch background cache."""

from __future__ import annotations

import dataclasses
import threading
from dataclasses import dataclass

import numpy as np

from .diffusion import Denoiser, DiffusionSchedule, ddim_infer
from .grid import as_image, as_mask, check_same_shape
from .rng import derive_seed, make_rng

DEFAULT_TAU = 0.08
DEFAULT_HIGH_FRACTION = 2.0 / 3.0
BACKGROUND_STD = 0.01


def fft2_power(patch: np.ndarray) -> np.ndarray:
    """|F(u, v)|^2 of the unnormalized 2-D DFT, DC at (0, 0)."""
    spec = np.fft.fft2(as_image(patch))
    return spec.real ** 2 + spec.imag ** 2


def folded_frequency(n: int) -> np.ndarray:
    """Per-index frequency folded onto [0, 1], 1 being Nyquist."""
    idx = np.arange(n)
    return np.minimum(idx, n - idx) / (n / 2.0)


def high_band(shape: tuple[int, int], fraction: float = DEFAULT_HIGH_FRACTION) -> np.ndarray:
    """Boolean mask of bins whose larger folded frequency exceeds ``fraction``."""
    fu = folded_frequency(shape[0])[:, None]
    fv = folded_frequency(shape[1])[None, :]
    return np.maximum(fu, fv) > fraction


def high_freq_ratio(power: np.ndarray, fraction: float = DEFAULT_HIGH_FRACTION, include_dc: bool = False) -> float:
    """Share of spectral energy in the high band.

    The DC bin is left out of the denominator by default, which makes the
    ratio blind to constant offsets as well as to scale. A spectrum with no
    (non-DC) energy has ratio 0.
    """
    power = np.asarray(power, dtype=np.float64)
    total = float(power.sum())
    if not include_dc:
        total -= float(power[0, 0])
    if total <= 0.0:
        return 0.0
    high = float(power[high_band(power.shape, fraction)].sum())
    return min(1.0, max(0.0, high / total))


def adjusted_score(gamma: float, mask_ratio: float, tau: float) -> float:
    return (1.0 - mask_ratio) * gamma + tau * mask_ratio


@dataclass(frozen=True)
class SpectralScore:
    gamma: float
    mask_ratio: float
    adjusted: float
    skip: bool


def should_skip(patch: np.ndarray, mask_patch: np.ndarray, tau: float = DEFAULT_TAU,
                fraction: float = DEFAULT_HIGH_FRACTION) -> SpectralScore:
    """Score ``patch`` (the masked input patch by default) for skipping.

    The mask ratio is the fraction of missing pixels in ``mask_patch``. A
    patch is skipped when its adjusted score is strictly below ``tau``.
    """
    patch = as_image(patch)
    mask_patch = as_mask(mask_patch)
    check_same_shape(patch, mask_patch)
    gamma = high_freq_ratio(fft2_power(patch), fraction)
    r = 1.0 - float(mask_patch.mean())
    adj = adjusted_score(gamma, r, tau)
    return SpectralScore(gamma, r, adj, adj < tau)


@dataclass(frozen=True)
class BackgroundCache:
    patch: np.ndarray
    key: tuple
    seed: int
    fresh: bool  # True only on the call that actually ran the sampler


_cache: dict[tuple, BackgroundCache] = {}
_cache_lock = threading.Lock()


def background_approx(den: Denoiser, sched: DiffusionSchedule, patch_size: int, seed: int) -> BackgroundCache:
    """Output of a full unconditioned run on a N(0, 0.01^2) input, computed once.

    Later calls with the same denoiser, schedule, patch size and seed return
    the stored patch without touching the denoiser.
    """
    key = (den.cache_key, sched.key, int(patch_size), int(seed))
    with _cache_lock:
        hit = _cache.get(key)
        if hit is not None:
            return dataclasses.replace(hit, fresh=False)
        synthetic = make_rng(derive_seed(seed, "background")).normal(0.0, BACKGROUND_STD, (patch_size, patch_size))
        synthetic = np.clip(synthetic, 0.0, 1.0)
        nothing_known = np.zeros((patch_size, patch_size), dtype=np.uint8)
        out = ddim_infer(synthetic, nothing_known, den, sched, sched.N, derive_seed(seed, "background-run"))
        out.setflags(write=False)
        entry = BackgroundCache(out, key, int(seed), True)
        _cache[key] = entry
        return entry


def clear_background_cache() -> None:
    with _cache_lock:
        _cache.clear()
