"""CSV and JSON writers for run reports, ablations and threshold sweeps.

Every file written here is a pure function of the run inputs; wall-clock
time goes to a separate ``timing.json`` so the rest stays byte-stable.

Column orders::

    ledger.csv    denoiser_evals, background_evals, pixel_steps, skipped_patches,
                  retained_patches, blended_seams, stitched_seams, modeled_peak,
                  low_evals, mid_evals, high_evals
    patches.csv   row, col, gamma, mask_ratio, adjusted, skip, kappa, steps
    ablation.csv  variant, ssim, psnr, then the ledger columns
    sweep.csv     tau, ssim, psnr, skipped_patches, pixel_steps
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .pipeline import AblationRow, CostLedger, RunConfig, RunReport, SweepRow

LEDGER_COLUMNS = (
    "denoiser_evals", "background_evals", "pixel_steps", "skipped_patches", "retained_patches",
    "blended_seams", "stitched_seams", "modeled_peak", "low_evals", "mid_evals", "high_evals",
)
PATCH_COLUMNS = ("row", "col", "gamma", "mask_ratio", "adjusted", "skip", "kappa", "steps")
ABLATION_COLUMNS = ("variant", "ssim", "psnr") + LEDGER_COLUMNS
SWEEP_COLUMNS = ("tau", "ssim", "psnr", "skipped_patches", "pixel_steps")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def ledger_row(ledger: CostLedger) -> list[str]:
    stages = ledger.stage_evals
    values = [
        ledger.denoiser_evals, ledger.background_evals, ledger.pixel_steps, ledger.skipped_patches,
        ledger.retained_patches, ledger.blended_seams, ledger.stitched_seams, float(ledger.modeled_peak),
        stages.get("low", 0), stages.get("mid", 0), stages.get("high", 0),
    ]
    return [_fmt(v) for v in values]


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    if not path.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_ledger_csv(path, ledger: CostLedger) -> None:
    _write_csv(path, LEDGER_COLUMNS, [ledger_row(ledger)])


def write_patches_csv(path, report: RunReport) -> None:
    rows = [
        [_fmt(v) for v in (p.anchor[0], p.anchor[1], p.gamma, p.mask_ratio, p.adjusted, p.skip, p.kappa, p.steps)]
        for p in report.patches
    ]
    _write_csv(path, PATCH_COLUMNS, rows)


def write_ablation_csv(path, rows: list[AblationRow]) -> None:
    _write_csv(path, ABLATION_COLUMNS,
               [[r.variant, _fmt(r.ssim), _fmt(r.psnr)] + ledger_row(r.report.ledger) for r in rows])


def write_sweep_csv(path, rows: list[SweepRow]) -> None:
    out = []
    for r in rows:
        led = r.report.ledger
        out.append([_fmt(r.tau), _fmt(r.ssim), _fmt(r.psnr), _fmt(led.skipped_patches), _fmt(led.pixel_steps)])
    _write_csv(path, SWEEP_COLUMNS, out)


def write_json(path, doc) -> None:
    path = Path(path)
    if not path.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_config(path, cfg: RunConfig, extra: dict | None = None) -> None:
    doc = {"config": cfg.to_dict()}
    if extra:
        doc.update(extra)
    write_json(path, doc)
