"""Command-line entry point for sparse-view sinogram completion.

Subcommands: synth, mask, complete, ablate, bench, metrics, sweep-tau.

Run settings come from ``RunConfig`` defaults, then an optional ``--config``
JSON file (a flat object of config keys, or the ``{"config": {...}}`` echo a
previous run wrote), then command-line flags. Every config key has a flag of
the same name in kebab case, e.g. ``--ddim-steps 50`` or ``--no-enable-skip``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import formats, report
from .diffusion import BlurDenoiser, OracleDenoiser
from .grid import DimensionError
from .metrics import quality
from .pipeline import RunConfig, ablate, complete, full_frame_peak, peak_terms, modeled_peak, sweep_tau
from .tomo import default_phantom, load_phantom, periodic_angle_mask, random_angle_mask, synthetic_sinogram

log = logging.getLogger("sinoforge")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("run configuration (defaults shown; flags override --config)")
    group.add_argument("--config", type=Path, help="JSON file with config keys")
    group.add_argument("--seed", type=int, default=None, help="run seed (default 0)")
    defaults = RunConfig()
    casts = {"int": int, "float": float, "str": str}
    for f in dataclasses.fields(RunConfig):
        if f.name == "seed":
            continue
        default = getattr(defaults, f.name)
        if f.type == "bool":
            group.add_argument(_flag(f.name), dest=f.name, action=argparse.BooleanOptionalAction, default=None,
                               help=f"default {default}")
        else:
            group.add_argument(_flag(f.name), dest=f.name, type=casts[f.type], default=None,
                               metavar=f.name.upper(), help=f"default {default}")
    group.add_argument("--no-skip", dest="enable_skip", action="store_false", help="same as --no-enable-skip")
    group.add_argument("--no-adaptive", dest="enable_adaptive", action="store_false",
                       help="same as --no-enable-adaptive")


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config is not None:
        doc = json.loads(Path(args.config).read_text())
        if isinstance(doc, dict) and isinstance(doc.get("config"), dict):
            doc = doc["config"]
        if not isinstance(doc, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        values.update(doc)
    for name in RunConfig.keys():
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return RunConfig.from_dict(values)


def _add_inputs(p: argparse.ArgumentParser, need_out: bool = True) -> None:
    p.add_argument("--in", dest="input", type=Path, required=True, help="incomplete sinogram (SGF1)")
    p.add_argument("--mask", type=Path, required=True, help="mask (SGM1), 1 = known")
    p.add_argument("--gt", type=Path, help="ground-truth sinogram (SGF1); required by the oracle denoiser")
    p.add_argument("--denoiser", choices=("oracle", "blur"), default="oracle", help="default oracle")


def _load_inputs(args):
    known = formats.read_image(args.input)
    mask = formats.read_mask(args.mask)
    if known.shape != mask.shape:
        raise DimensionError(f"input {known.shape} and mask {mask.shape} differ in shape")
    gt = formats.read_image(args.gt) if args.gt is not None else None
    if gt is not None and gt.shape != known.shape:
        raise DimensionError(f"ground truth {gt.shape} does not match input {known.shape}")
    if args.denoiser == "oracle":
        if gt is None:
            raise ValueError("the oracle denoiser needs --gt")
        den = OracleDenoiser(gt)
    else:
        den = BlurDenoiser()
    return known, mask, gt, den


def _out_dir(path: Path) -> Path:
    if not path.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {path}")
    return path


def cmd_synth(args) -> None:
    ph = load_phantom(args.phantom, args.size) if args.phantom else default_phantom(args.size)
    case = synthetic_sinogram(args.size, args.angles, args.detectors, ph)
    out = Path(args.out)
    stem = out.with_suffix("")
    formats.write_image(out, case.sinogram)
    formats.write_pgm(stem.with_suffix(".pgm"), case.sinogram)
    formats.write_image(Path(f"{stem}.phantom.sgf"), case.phantom)
    formats.write_pgm(Path(f"{stem}.phantom.pgm"), case.phantom)
    print(f"sinogram {case.sinogram.shape[0]}x{case.sinogram.shape[1]} -> {out}")


def cmd_mask(args) -> None:
    if args.like is not None:
        angles, detectors = formats.read_image(args.like).shape
    else:
        angles, detectors = args.angles, args.detectors
    if args.kind == "random":
        mask = random_angle_mask(angles, args.ratio, args.seed, detectors)
    else:
        mask = periodic_angle_mask(angles, args.ratio, detectors)
    formats.write_mask(args.out, mask)
    if args.apply is not None:
        sino = formats.read_image(args.apply)
        if sino.shape != mask.shape:
            raise DimensionError(f"sinogram {sino.shape} does not match mask {mask.shape}")
        formats.write_image(args.masked_out, sino * mask)
    kept = int(mask[:, 0].sum())
    print(f"kept {kept}/{angles} angles -> {args.out}")


def cmd_complete(args) -> None:
    cfg = build_config(args)
    out = _out_dir(args.out)
    known, mask, gt, den = _load_inputs(args)
    rep = complete(known, mask, den, cfg)
    formats.write_image(out / "completed.sgf", rep.completed)
    formats.write_pgm(out / "completed.pgm", rep.completed)
    report.write_ledger_csv(out / "ledger.csv", rep.ledger)
    report.write_patches_csv(out / "patches.csv", rep)
    report.write_config(out / "config.json", cfg, {"denoiser": args.denoiser})
    report.write_json(out / "timing.json", {"wall_time": rep.ledger.wall_time})
    led = rep.ledger
    print(f"denoiser_evals={led.denoiser_evals} pixel_steps={led.pixel_steps} "
          f"skipped={led.skipped_patches} retained={led.retained_patches}")
    if gt is not None:
        print(quality(rep.completed, gt).line())


def cmd_ablate(args) -> None:
    cfg = build_config(args)
    out = _out_dir(args.out)
    known, mask, gt, den = _load_inputs(args)
    t0 = time.perf_counter()
    rows = ablate(known, mask, den, cfg, gt)
    report.write_ablation_csv(out / "ablation.csv", rows)
    report.write_config(out / "config.json", cfg, {"denoiser": args.denoiser})
    report.write_json(out / "timing.json", {"wall_time": time.perf_counter() - t0,
                                            "variants": {r.variant: r.report.ledger.wall_time for r in rows}})
    for r in rows:
        print(f"{r.variant}: pixel_steps={r.report.ledger.pixel_steps} ssim={report._fmt(r.ssim)}")


def cmd_sweep_tau(args) -> None:
    cfg = build_config(args)
    taus = [float(t) for t in args.taus.split(",") if t.strip()]
    known, mask, gt, den = _load_inputs(args)
    rows = sweep_tau(known, mask, den, taus, cfg, gt)
    report.write_sweep_csv(args.out, rows)
    for r in rows:
        print(f"tau={r.tau} skipped={r.report.ledger.skipped_patches} pixel_steps={r.report.ledger.pixel_steps}")


BENCH_COLUMNS = ("height", "width", "low", "mid", "patch", "buffers", "modeled_peak", "full_frame_peak",
                 "reduction", "dominant")


def cmd_bench(args) -> None:
    """Tabulate the modeled peak footprint per stage for a list of frame sizes."""
    cfg = build_config(args)
    rows = []
    for s in args.sizes.split(","):
        n = int(s)
        terms = peak_terms(cfg, n, n)
        peak = modeled_peak(cfg, n, n)
        full = full_frame_peak(cfg, n, n)
        dominant = max(terms, key=terms.get)
        rows.append([n, n] + [report._fmt(float(terms[k])) if k in terms else "" for k in
                              ("low", "mid", "patch", "buffers")]
                    + [report._fmt(float(peak)), report._fmt(float(full)), report._fmt(1.0 - peak / full), dominant])
        print(f"{n}x{n}: peak={peak:g} full={full:g} reduction={1.0 - peak / full:.3f} dominant={dominant}")
    if args.out is not None:
        report._write_csv(args.out, BENCH_COLUMNS, [[report._fmt(v) for v in r] for r in rows])


def cmd_metrics(args) -> None:
    a = formats.read_image(args.a)
    b = formats.read_image(args.b)
    q = quality(a, b)
    print(q.line())
    line = f"{args.a},{args.b},{q.ssim!r},{q.psnr!r}"
    print(line)
    if args.csv is not None:
        fresh = not Path(args.csv).exists()
        with open(args.csv, "a") as fh:
            if fresh:
                fh.write("a,b,ssim,psnr\n")
            fh.write(line + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sinoforge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="progress lines on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="phantom, sinogram and previews")
    p.add_argument("--phantom", type=Path, help="ellipse list JSON (default: modified Shepp-Logan)")
    p.add_argument("--size", type=int, default=128, help="phantom side in pixels (default 128)")
    p.add_argument("--angles", type=int, default=180, help="projection angles over [0, pi) (default 180)")
    p.add_argument("--detectors", type=int, default=None, help="detector bins (default: size)")
    p.add_argument("--out", type=Path, required=True, help="sinogram path (SGF1); siblings get the previews")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mask", help="angular sampling mask")
    p.add_argument("--like", type=Path, help="take the shape from this SGF1 file")
    p.add_argument("--angles", type=int, default=180, help="default 180")
    p.add_argument("--detectors", type=int, default=128, help="default 128")
    p.add_argument("--ratio", type=float, default=0.8, help="fraction of angles removed (default 0.8)")
    p.add_argument("--kind", choices=("random", "periodic"), default="random", help="default random")
    p.add_argument("--seed", type=int, default=0, help="default 0")
    p.add_argument("--apply", type=Path, help="also write this sinogram with the mask applied")
    p.add_argument("--masked-out", type=Path, help="where --apply writes")
    p.add_argument("--out", type=Path, required=True, help="mask path (SGM1)")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("complete", help="run the three-stage completion")
    _add_inputs(p)
    p.add_argument("--out", type=Path, required=True, help="existing output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("ablate", help="run the six ablation variants")
    _add_inputs(p)
    p.add_argument("--out", type=Path, required=True, help="existing output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep-tau", help="one completion per skip threshold")
    _add_inputs(p)
    p.add_argument("--taus", default="0.12,0.08,0.05", help="comma list (default 0.12,0.08,0.05)")
    p.add_argument("--out", type=Path, required=True, help="CSV path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep_tau)

    p = sub.add_parser("bench", help="modeled peak footprint per stage")
    p.add_argument("--sizes", default="512,1024,2048", help="comma list of square sizes (default 512,1024,2048)")
    p.add_argument("--out", type=Path, help="optional CSV path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("metrics", help="SSIM and PSNR of two images")
    p.add_argument("a", type=Path, help="SGF1 image")
    p.add_argument("b", type=Path, help="SGF1 image")
    p.add_argument("--csv", type=Path, help="append the CSV line here")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    if args.command == "mask" and args.apply is not None and args.masked_out is None:
        parser.error("--apply needs --masked-out")
    try:
        args.func(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"sinoforge {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
