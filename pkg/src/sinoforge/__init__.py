"""Resolution-guided progressive diffusion completion for sparse-view sinograms."""

from .diffusion import BlurDenoiser, CountingDenoiser, Denoiser, OracleDenoiser, ddim_infer, make_schedule
from .metrics import psnr, ssim
from .pipeline import CostLedger, RunConfig, RunReport, ablate, complete, modeled_peak, sweep_tau

__all__ = [
    "BlurDenoiser", "CountingDenoiser", "Denoiser", "OracleDenoiser", "ddim_infer", "make_schedule",
    "psnr", "ssim", "CostLedger", "RunConfig", "RunReport", "ablate", "complete", "modeled_peak", "sweep_tau",
]
__version__ = "0.1.0"
