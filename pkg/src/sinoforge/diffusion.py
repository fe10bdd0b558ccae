"""Mask-conditioned deterministic DDIM sampling over a pluggable denoiser.

The sampler follows the RePaint recipe without resampling jumps: after each
DDIM update the known pixels are overwritten with the ground truth diffused
to the new noise level. Denoisers only have to predict noise; two analytic
ones are provided so the whole pipeline runs without a trained network.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import as_image, as_mask, check_same_shape, downsample, pad_by
from .rng import derive_seed, make_rng


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiffusionSchedule:
    """Linear-beta noise schedule plus the subsampled DDIM timesteps.

    ``alpha_bar[t]`` is the cumulative signal fraction after ``t`` forward
    steps, so ``alpha_bar[0] == 1``. The DDIM step at timestep ``t`` acts on
    noise level ``alpha_bar[t + 1]`` and moves to ``alpha_bar[t_next + 1]``,
    or to the clean level 1.0 after the final timestep 0.
    """

    T: int
    alpha_bar: np.ndarray
    ddim_steps: tuple[int, ...]
    beta_min: float
    beta_max: float

    @property
    def N(self) -> int:
        return len(self.ddim_steps)

    def level(self, t: int) -> float:
        return float(self.alpha_bar[t + 1])

    @property
    def key(self) -> tuple:
        return (self.T, self.N, self.beta_min, self.beta_max)


def make_schedule(T: int = 1000, N: int = 50, beta_min: float = 1e-4, beta_max: float = 0.02) -> DiffusionSchedule:
    if not 1 <= N <= T:
        raise ScheduleError(f"need 1 <= N <= T, got N={N}, T={T}")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise ScheduleError(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
    betas = np.linspace(beta_min, beta_max, T)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    # evenly spaced over [0, T); for T divisible by N this is 0, T/N, ..., T - T/N
    steps = np.floor(np.arange(N) * (T / N)).astype(int)[::-1]
    return DiffusionSchedule(T, alpha_bar, tuple(int(s) for s in steps), float(beta_min), float(beta_max))


class Denoiser:
    """Noise predictor interface.

    ``predict_noise`` must return an array of the input's shape and be
    deterministic. ``localize`` returns the denoiser to use on a resampled
    and/or cropped view of the full-resolution frame, and ``padded`` the one
    for a frame reflect-padded at the bottom/right; analytic denoisers that
    need no spatial context simply return themselves. ``background`` returns
    the denoiser used to build the skipped-patch approximation.
    """

    def predict_noise(self, x_t: np.ndarray, alpha_bar_t: float) -> np.ndarray:
        raise NotImplementedError

    def localize(self, scale: float = 1.0, window: tuple[int, int, int, int] | None = None) -> "Denoiser":
        return self

    def padded(self, pad: tuple[int, int]) -> "Denoiser":
        return self

    def background(self) -> "Denoiser":
        return self

    @property
    def cache_key(self) -> tuple:
        return (type(self).__name__,)


class OracleDenoiser(Denoiser):
    """Returns the exact noise that maps ``x_t`` back onto a known target.

    ``target=None`` stands for an all-zero target of whatever shape is passed.
    """

    def __init__(self, target: np.ndarray | None = None):
        self.target = None if target is None else as_image(target)

    def predict_noise(self, x_t, alpha_bar_t):
        x_t = as_image(x_t)
        target = np.zeros_like(x_t) if self.target is None else self.target
        check_same_shape(x_t, target)
        if alpha_bar_t >= 1.0:
            raise ScheduleError("oracle noise is undefined at alpha_bar = 1")
        return (x_t - np.sqrt(alpha_bar_t) * target) / np.sqrt(1.0 - alpha_bar_t)

    def localize(self, scale=1.0, window=None):
        if self.target is None:
            return self
        target = self.target
        if scale != 1.0:
            target = downsample(target, scale)
        if window is not None:
            r0, r1, c0, c1 = window
            target = target[r0:r1, c0:c1]
        return OracleDenoiser(target)

    def padded(self, pad):
        if self.target is None:
            return self
        return OracleDenoiser(pad_by(self.target, pad))

    def background(self):
        # skipped patches stand for empty background, so the oracle targets zeros
        return OracleDenoiser(None)

    @property
    def cache_key(self):
        if self.target is None:
            return ("oracle", "zero")
        return ("oracle", self.target.shape, hash(self.target.tobytes()))


class BlurDenoiser(Denoiser):
    """Smoothness prior: the implied clean estimate is a Gaussian blur of clamp(x_t)."""

    def __init__(self, radius: float = 2.0):
        self.radius = float(radius)

    def predict_noise(self, x_t, alpha_bar_t):
        x_t = as_image(x_t)
        if alpha_bar_t >= 1.0:
            return np.zeros_like(x_t)
        x0 = ndimage.gaussian_filter(np.clip(x_t, 0.0, 1.0), self.radius, mode="reflect")
        return (x_t - np.sqrt(alpha_bar_t) * x0) / np.sqrt(1.0 - alpha_bar_t)

    @property
    def cache_key(self):
        return ("blur", self.radius)


class CountingDenoiser(Denoiser):
    """Wraps a denoiser and counts ``predict_noise`` calls, including those of
    localized views (they share one counter)."""

    def __init__(self, inner: Denoiser, _counter: list | None = None, _lock: threading.Lock | None = None):
        self.inner = inner
        self._counter = _counter if _counter is not None else [0]
        self._lock = _lock or threading.Lock()

    @property
    def calls(self) -> int:
        return self._counter[0]

    def reset(self) -> None:
        with self._lock:
            self._counter[0] = 0

    def predict_noise(self, x_t, alpha_bar_t):
        with self._lock:
            self._counter[0] += 1
        return self.inner.predict_noise(x_t, alpha_bar_t)

    def localize(self, scale=1.0, window=None):
        return CountingDenoiser(self.inner.localize(scale, window), self._counter, self._lock)

    def padded(self, pad):
        return CountingDenoiser(self.inner.padded(pad), self._counter, self._lock)

    def background(self):
        return CountingDenoiser(self.inner.background(), self._counter, self._lock)

    @property
    def cache_key(self):
        return self.inner.cache_key


def ddim_step(x_t: np.ndarray, eps: np.ndarray, a_t: float, a_prev: float) -> np.ndarray:
    """Deterministic (eta = 0) DDIM update from level ``a_t`` to ``a_prev``."""
    if a_t <= 0.0:
        raise ScheduleError("ddim_step is singular at alpha_bar = 0")
    if not (0.0 < a_t <= 1.0 and 0.0 < a_prev <= 1.0):
        raise ScheduleError(f"noise levels must lie in (0, 1], got {a_t}, {a_prev}")
    check_same_shape(x_t, eps)
    if a_t == a_prev:
        return x_t.copy()
    x0 = (x_t - np.sqrt(1.0 - a_t) * eps) / np.sqrt(a_t)
    return np.sqrt(a_prev) * x0 + np.sqrt(1.0 - a_prev) * eps


def condition_on_known(x: np.ndarray, known: np.ndarray, mask: np.ndarray, a_prev: float,
                       noise: np.ndarray) -> np.ndarray:
    """Overwrite known pixels with ``known`` forward-diffused to ``a_prev``."""
    check_same_shape(x, known, mask, noise)
    diffused = np.sqrt(a_prev) * known + np.sqrt(1.0 - a_prev) * noise
    return np.where(mask.astype(bool), diffused, x)


STEP_MODES = ("late_entry", "thinned")


def trajectory(sched: DiffusionSchedule, steps: int, step_mode: str = "late_entry") -> list[int]:
    """Timesteps visited by a run of ``steps`` denoiser evaluations."""
    if not 1 <= steps <= sched.N:
        raise ScheduleError(f"steps must lie in [1, {sched.N}], got {steps}")
    if step_mode == "late_entry":
        return list(sched.ddim_steps[sched.N - steps:])
    if step_mode == "thinned":
        idx = np.round(np.linspace(0, sched.N - 1, steps)).astype(int)
        return [sched.ddim_steps[i] for i in idx]
    raise ValueError(f"unknown step_mode {step_mode!r}; expected one of {STEP_MODES}")


def ddim_infer(known: np.ndarray, mask: np.ndarray, den: Denoiser, sched: DiffusionSchedule,
               steps: int | None = None, seed: int = 0, init: np.ndarray | None = None,
               step_mode: str = "late_entry") -> np.ndarray:
    """Complete ``known`` where ``mask == 0`` with exactly ``steps`` denoiser calls.

    A full-length run starts from seeded Gaussian noise. A shortened
    late-entry run instead forward-diffuses ``init`` (default: ``known``) to
    the noise level of its first timestep. The final update lands on the
    clean level, so known pixels come back exactly; the result is clamped
    to [0, 1].
    """
    known = as_image(known)
    mask = as_mask(mask)
    check_same_shape(known, mask)
    steps = sched.N if steps is None else int(steps)
    ts = trajectory(sched, steps, step_mode)

    noise0 = make_rng(derive_seed(seed, "init")).standard_normal(known.shape)
    if steps < sched.N and step_mode == "late_entry":
        start = known if init is None else as_image(init)
        check_same_shape(start, known)
        a0 = sched.level(ts[0])
        x = np.sqrt(a0) * start + np.sqrt(1.0 - a0) * noise0
    else:
        x = noise0

    for i, t in enumerate(ts):
        a_t = sched.level(t)
        a_prev = sched.level(ts[i + 1]) if i + 1 < len(ts) else 1.0
        eps = den.predict_noise(x, a_t)
        x = ddim_step(x, eps, a_t, a_prev)
        noise = make_rng(derive_seed(seed, "step", i)).standard_normal(known.shape)
        x = condition_on_known(x, known, mask, a_prev, noise)
    return np.clip(x, 0.0, 1.0)

