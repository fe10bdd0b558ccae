"""Three-stage completion run: low-resolution prior, fused mid-resolution
refinement, then patch-wise full-resolution inference with spectral patch
skipping, complexity-driven step counts and gated seam blending.
"""

from __future__ import annotations

import dataclasses
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .complexity import allocate_steps, kappa
from .diffusion import STEP_MODES, Denoiser, ddim_infer, make_schedule
from .grid import (DimensionError, as_image, as_mask, check_same_shape, downsample, downsample_mask,
                   pad_to_multiple, sobel_magnitude, upsample_nearest)
from .metrics import psnr, ssim
from .patching import BlendPolicy, SeamStats, assemble, build_grid, fuse_mid, fuse_patch, prior_window
from .rng import derive_seed
from .spectral import background_approx, should_skip

log = logging.getLogger(__name__)

LOW, MID = 0.25, 0.5


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # diffusion
    T: int = 1000
    ddim_steps: int = 50
    beta_min: float = 1e-4
    beta_max: float = 0.02
    step_mode: str = "late_entry"
    seed: int = 0
    # patch skipping
    tau: float = 0.08
    omega_high_fraction: float = 2.0 / 3.0
    background_seed: int = 0
    skip_input: str = "raw"
    # step allocation
    s_min: int = 10
    s_max: int = 50
    entropy_bins: int = 256
    normalize_kappa: bool = False
    # tiling and blending
    patch: int = 128
    stride: int = 96
    blend_band: int = 32
    eta: float = 0.05
    # stage / mechanism toggles
    enable_low: bool = True
    enable_mid: bool = True
    enable_high: bool = True
    enable_skip: bool = True
    enable_adaptive: bool = True
    # execution and cost model
    workers: int = 1
    activation_per_pixel: float = 1.0
    buffer_per_pixel: float = 1.0 / 512.0

    def __post_init__(self):
        if self.s_min > self.s_max:
            raise ConfigError(f"s_min ({self.s_min}) exceeds s_max ({self.s_max})")
        if self.s_min < 1:
            raise ConfigError(f"s_min must be >= 1, got {self.s_min}")
        if self.s_max > self.ddim_steps:
            raise ConfigError(f"s_max ({self.s_max}) exceeds the DDIM step budget ({self.ddim_steps})")
        if self.step_mode not in STEP_MODES:
            raise ConfigError(f"step_mode must be one of {STEP_MODES}, got {self.step_mode!r}")
        if self.skip_input not in ("fused", "raw"):
            raise ConfigError(f"skip_input must be 'fused' or 'raw', got {self.skip_input!r}")
        if self.patch % 4:
            raise ConfigError(f"patch size must be a multiple of 4, got {self.patch}")
        if not 1 <= self.stride <= self.patch:
            raise ConfigError(f"stride must lie in [1, patch], got {self.stride}")
        if self.blend_band < 1:
            raise ConfigError(f"blend_band must be >= 1, got {self.blend_band}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")

    @property
    def overlap(self) -> int:
        return self.patch - self.stride

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        """Build from a flat mapping; kebab-case keys are accepted. Unknown keys are an error."""
        names = set(cls.keys())
        clean = {}
        unknown = []
        for k, v in values.items():
            key = k.replace("-", "_")
            if key not in names:
                unknown.append(k)
            else:
                clean[key] = v
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kinds = {f.name: f.type for f in dataclasses.fields(cls)}
        for k, v in clean.items():
            kind = kinds[k]
            if kind == "bool" and not isinstance(v, bool):
                raise ConfigError(f"config key {k!r} must be a boolean, got {v!r}")
            if kind == "int":
                if isinstance(v, bool) or int(v) != v:
                    raise ConfigError(f"config key {k!r} must be an integer, got {v!r}")
                clean[k] = int(v)
            elif kind == "float":
                clean[k] = float(v)
        return cls(**clean)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class CostLedger:
    denoiser_evals: int = 0
    background_evals: int = 0
    pixel_steps: int = 0
    skipped_patches: int = 0
    retained_patches: int = 0
    blended_seams: int = 0
    stitched_seams: int = 0
    modeled_peak: float = 0.0
    wall_time: float = 0.0
    stage_evals: dict = field(default_factory=dict)

    @property
    def total_evals(self) -> int:
        return self.denoiser_evals + self.background_evals


@dataclass(frozen=True)
class PatchRecord:
    anchor: tuple[int, int]
    gamma: float
    mask_ratio: float
    adjusted: float
    skip: bool
    kappa: float
    steps: int


@dataclass
class RunReport:
    completed: np.ndarray
    ledger: CostLedger
    patches: list[PatchRecord]
    config: RunConfig
    low: np.ndarray | None = None
    mid: np.ndarray | None = None


def peak_terms(cfg: RunConfig, height: int, width: int) -> dict[str, float]:
    """Activation footprint of each enabled stage, in units of ``activation_per_pixel``.

    low   = C * ceil(H/4) * ceil(W/4)
    mid   = C * ceil(H/2) * ceil(W/2)
    patch = C * P^2          (patches run one at a time)
    buffers = C_buf * H * W  (full-resolution input/mask/output images)
    """
    c = cfg.activation_per_pixel
    terms = {"buffers": cfg.buffer_per_pixel * height * width}
    if cfg.enable_low:
        terms["low"] = c * (-(-height // 4)) * (-(-width // 4))
    if cfg.enable_mid:
        terms["mid"] = c * (-(-height // 2)) * (-(-width // 2))
    if cfg.enable_high:
        terms["patch"] = c * cfg.patch * cfg.patch
    return terms


def modeled_peak(cfg: RunConfig, height: int, width: int) -> float:
    return max(peak_terms(cfg, height, width).values())


def full_frame_peak(cfg: RunConfig, height: int, width: int) -> float:
    """Footprint of a single diffusion pass over the whole full-resolution frame."""
    return cfg.activation_per_pixel * height * width


def _worker_count(requested: int) -> int:
    cap = os.environ.get("SINOFORGE_THREADS")
    n = max(1, int(requested))
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def complete(known: np.ndarray, mask: np.ndarray, den: Denoiser, cfg: RunConfig | None = None) -> RunReport:
    """Complete the missing pixels of ``known`` (mask 0) and account for the cost."""
    cfg = cfg or RunConfig()
    t0 = time.perf_counter()
    known = as_image(known)
    mask = as_mask(mask)
    check_same_shape(known, mask)
    h, w = known.shape
    sched = make_schedule(cfg.T, cfg.ddim_steps, cfg.beta_min, cfg.beta_max)
    n = sched.N

    x, pad = pad_to_multiple(known * mask, 4)
    m, _ = pad_to_multiple(mask, 4)
    if pad != (0, 0):
        # localized oracle targets must see the same padded frame
        den = den.padded(pad)
    hp, wp = x.shape
    if cfg.enable_high and (cfg.patch > hp or cfg.patch > wp):
        raise DimensionError(f"image {known.shape} is smaller than the patch size {cfg.patch}")

    ledger = CostLedger()
    low_out = mid_out = None

    if cfg.enable_low:
        k_low, m_low = downsample(x, LOW), downsample_mask(m, LOW)
        low_out = ddim_infer(k_low, m_low, den.localize(LOW), sched, n, derive_seed(cfg.seed, "low"))
        ledger.stage_evals["low"] = n
        ledger.pixel_steps += k_low.size * n
        log.debug("low stage done: %s", k_low.shape)

    if cfg.enable_mid:
        k_mid, m_mid = downsample(x, MID), downsample_mask(m, MID)
        fused_mid = fuse_mid(k_mid, upsample_nearest(low_out, 2)) if low_out is not None else k_mid
        mid_out = ddim_infer(k_mid, m_mid, den.localize(MID), sched, n, derive_seed(cfg.seed, "mid"),
                             init=fused_mid, step_mode=cfg.step_mode)
        ledger.stage_evals["mid"] = n
        ledger.pixel_steps += k_mid.size * n
        log.debug("mid stage done: %s", k_mid.shape)

    # coarsest-available prior for the full-resolution stage
    if mid_out is not None:
        prior, factor = mid_out, 2
    elif low_out is not None:
        prior, factor = low_out, 4
    else:
        prior, factor = None, 1

    records: list[PatchRecord] = []
    if cfg.enable_high:
        out = _high_stage(x, m, den, sched, cfg, prior, factor, ledger, records)
    elif prior is not None:
        out = upsample_nearest(prior, factor)
    else:
        out = x.copy()

    out = np.where(m.astype(bool), x, out)[:h, :w]
    out = np.clip(out, 0.0, 1.0)
    ledger.denoiser_evals = sum(ledger.stage_evals.values())
    ledger.modeled_peak = modeled_peak(cfg, hp, wp)
    ledger.wall_time = time.perf_counter() - t0
    return RunReport(out, ledger, records, cfg, low_out, mid_out)


def _high_stage(x, m, den, sched, cfg, prior, factor, ledger, records) -> np.ndarray:
    grid = build_grid(x.shape[0], x.shape[1], cfg.patch, cfg.stride)
    P = cfg.patch

    # phase 1: fuse and score every patch before any inference
    fused, scores, kappas = {}, {}, {}
    for anchor in grid.positions:
        xp = grid.cut(x, anchor)
        mp = grid.cut(m, anchor)
        if prior is not None:
            r0, r1, c0, c1 = prior_window(anchor, P, prior.shape, factor)
            fp = fuse_patch(xp, upsample_nearest(prior[r0:r1, c0:c1], factor))
        else:
            fp = xp
        fused[anchor] = fp
        probe = fp if cfg.skip_input == "fused" else xp
        score = should_skip(probe, mp, cfg.tau, cfg.omega_high_fraction)
        if not cfg.enable_skip:
            score = dataclasses.replace(score, skip=False)
        scores[anchor] = score
        kappas[anchor] = kappa(fp, cfg.entropy_bins).kappa

    # phase 2: steps from the mean complexity over all retained patches
    retained = [a for a in grid.positions if not scores[a].skip]
    steps = {}
    if retained:
        if cfg.enable_adaptive:
            alloc = allocate_steps([kappas[a] for a in retained], cfg.s_min, cfg.s_max, cfg.normalize_kappa)
            steps = dict(zip(retained, alloc.per_patch_steps))
        else:
            steps = {a: sched.N for a in retained}

    # phase 3: inference (skipped patches reuse the cached background)
    outputs = {}
    skipped = [a for a in grid.positions if scores[a].skip]
    if skipped:
        bg = background_approx(den.background(), sched, P, cfg.background_seed)
        ledger.background_evals = sched.N if bg.fresh else 0
        for a in skipped:
            outputs[a] = np.array(bg.patch)

    def run(anchor):
        window = grid.window(anchor)
        return anchor, ddim_infer(grid.cut(x, anchor), grid.cut(m, anchor), den.localize(1.0, window), sched,
                                  steps[anchor], derive_seed(cfg.seed, "patch", *anchor),
                                  init=fused[anchor], step_mode=cfg.step_mode)

    workers = _worker_count(cfg.workers)
    if workers > 1 and len(retained) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs.update(pool.map(run, retained))
    else:
        outputs.update(run(a) for a in retained)

    ledger.stage_evals["high"] = sum(steps.values())
    ledger.pixel_steps += P * P * sum(steps.values())
    ledger.skipped_patches = len(skipped)
    ledger.retained_patches = len(retained)

    for a in grid.positions:
        s = scores[a]
        records.append(PatchRecord(a, s.gamma, s.mask_ratio, s.adjusted, s.skip, kappas[a], steps.get(a, 0)))

    # phase 4: stitch, gating blends on the prior's gradient
    if prior is not None:
        grad = upsample_nearest(sobel_magnitude(prior), factor) if factor > 1 else sobel_magnitude(prior)
    else:
        grad = sobel_magnitude(x)
    stats = SeamStats()
    out = assemble(outputs, grid, grad, BlendPolicy(cfg.eta, min(cfg.blend_band, max(1, cfg.overlap))), stats)
    ledger.blended_seams, ledger.stitched_seams = stats.blended, stats.stitched
    return out


ABLATION_VARIANTS = (
    ("full", {}),
    ("w/o low", {"enable_low": False}),
    ("w/o mid", {"enable_mid": False}),
    ("w/o high", {"enable_high": False}),
    ("w/o adaptive", {"enable_adaptive": False}),
    ("w/o skipping", {"enable_skip": False}),
)


@dataclass
class AblationRow:
    variant: str
    report: RunReport
    ssim: float | None
    psnr: float | None


def ablate(known, mask, den: Denoiser, base_cfg: RunConfig | None = None,
           ground_truth: np.ndarray | None = None) -> list[AblationRow]:
    """Run ``complete`` once per ablation variant with a shared seed."""
    base_cfg = base_cfg or RunConfig()
    rows = []
    for name, changes in ABLATION_VARIANTS:
        rep = complete(known, mask, den, base_cfg.replace(**changes))
        if ground_truth is not None:
            rows.append(AblationRow(name, rep, ssim(rep.completed, ground_truth), psnr(rep.completed, ground_truth)))
        else:
            rows.append(AblationRow(name, rep, None, None))
    return rows


@dataclass
class SweepRow:
    tau: float
    report: RunReport
    ssim: float | None
    psnr: float | None


def sweep_tau(known, mask, den: Denoiser, taus, base_cfg: RunConfig | None = None,
              ground_truth: np.ndarray | None = None) -> list[SweepRow]:
    """One ``complete`` run per threshold, all sharing the base seed."""
    taus = [float(t) for t in taus]
    if not taus:
        raise ConfigError("tau list is empty")
    base_cfg = base_cfg or RunConfig()
    rows = []
    for tau in taus:
        rep = complete(known, mask, den, base_cfg.replace(tau=tau))
        if ground_truth is not None:
            rows.append(SweepRow(tau, rep, ssim(rep.completed, ground_truth), psnr(rep.completed, ground_truth)))
        else:
            rows.append(SweepRow(tau, rep, None, None))
    return rows
