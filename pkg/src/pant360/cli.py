"""Command-line front end exposing every pipeline stage.

Every run prints its fully-resolved configuration, so invocations are
reproducible from the log alone.  A plain `key = value` config file may seed
any flag; explicit flags win.  Exit codes: 0 success, 1 validation error,
2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import evalkit
from .denoisers import null_conditioning
from .errors import PantError, ValidationError
from .geometry import ExtendSpec, count_matching_windows, extend
from .pipeline import (
    PipelineConfig,
    baseline_translate,
    render_report,
    translate,
    translate_freecontrol,
)
from .schedule import run_inversion
from .codec import make_codec
from .tensors import read_png, write_png, write_raw
from .tiler import build_schedule

_PIPELINE_DEFAULTS = {
    "width": 1024,
    "height": 512,
    "alpha": None,
    "omega": None,
    "mode": "paper",
    "train_steps": 1000,
    "beta_start": 1e-4,
    "beta_end": 0.02,
    "ddim_steps": 50,
    "control": "pnp",
    "tau_f": 0.8,
    "tau_a": 0.5,
    "lambda_s": 1.0,
    "lambda_a": 1.0,
    "denoiser": "conv-toy",
    "denoiser_seed": 0,
    "denoiser_mean": 0.0,
    "denoiser_var": 1.0,
    "codec": "block-avg",
    "seed": 0,
    "prompt": None,
    "threads": os.cpu_count() or 1,
}

_CASTS = {
    "width": int, "height": int, "alpha": int, "omega": int,
    "train_steps": int, "ddim_steps": int, "denoiser_seed": int,
    "seed": int, "threads": int,
    "beta_start": float, "beta_end": float, "tau_f": float, "tau_a": float,
    "lambda_s": float, "lambda_a": float, "denoiser_mean": float,
    "denoiser_var": float,
    "mode": str, "control": str, "denoiser": str, "codec": str, "prompt": str,
}


def _add_pipeline_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file seeding any flag below")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--alpha", type=int, help="split constant (default 3W/4)")
    p.add_argument("--omega", type=int, help="latent sliding distance (default W/64)")
    p.add_argument("--mode", choices=["paper", "circular"])
    p.add_argument("--train-steps", type=int, dest="train_steps")
    p.add_argument("--beta-start", type=float, dest="beta_start")
    p.add_argument("--beta-end", type=float, dest="beta_end")
    p.add_argument("--ddim-steps", type=int, dest="ddim_steps")
    p.add_argument("--control", choices=["pnp", "freecontrol", "none"])
    p.add_argument("--tau-f", type=float, dest="tau_f")
    p.add_argument("--tau-a", type=float, dest="tau_a")
    p.add_argument("--lambda-s", type=float, dest="lambda_s")
    p.add_argument("--lambda-a", type=float, dest="lambda_a")
    p.add_argument("--denoiser", choices=["zero", "linear-gauss", "conv-toy", "conv-toy-flat"])
    p.add_argument("--denoiser-seed", type=int, dest="denoiser_seed")
    p.add_argument("--denoiser-mean", type=float, dest="denoiser_mean")
    p.add_argument("--denoiser-var", type=float, dest="denoiser_var")
    p.add_argument("--codec", choices=["block-avg"])
    p.add_argument("--seed", type=int)
    p.add_argument("--prompt")
    p.add_argument("--threads", type=int)


def _parse_config_file(path: str) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _CASTS:
                raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _CASTS[key](value)
    return values


def _resolve_config(args) -> PipelineConfig:
    merged = dict(_PIPELINE_DEFAULTS)
    if getattr(args, "config", None):
        merged.update(_parse_config_file(args.config))
    for key in _PIPELINE_DEFAULTS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    return PipelineConfig(**merged)


def _print_config(cfg: PipelineConfig, out=None):
    # resolve the stream at call time so stdout redirection is honoured
    out = out if out is not None else sys.stdout
    for key in _PIPELINE_DEFAULTS:
        print(f"{key} = {getattr(cfg, key)}", file=out)
    print(f"alpha_resolved = {cfg.resolved_alpha()}", file=out)
    print(f"omega_resolved = {cfg.resolved_omega()}", file=out)


def _write_outputs(args, img, report):
    write_png(args.output, img)
    if getattr(args, "report", None):
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(render_report(report))
    print(render_report(report), end="")


def _cmd_extend(args):
    cfg = _resolve_config(args)
    _print_config(cfg)
    img = read_png(args.input)
    cfg = cfg.replace(width=img.shape[2], height=img.shape[1])
    out = extend(img, cfg.extend_spec())
    write_png(args.output, out)
    return 0


def _cmd_invert(args):
    cfg = _resolve_config(args)
    _print_config(cfg)
    img = read_png(args.input)
    cfg = cfg.replace(width=img.shape[2], height=img.shape[1])
    nsched = cfg.noise_schedule()
    codec = make_codec(cfg.codec)
    z0 = codec.encode(extend(img, cfg.extend_spec()))
    x_T, _ = run_inversion(z0, cfg.build_denoiser(nsched), null_conditioning(), nsched)
    write_raw(args.output, x_T)
    return 0


def _translate_like(args, fn):
    cfg = _resolve_config(args)
    img = read_png(args.input)
    cfg = cfg.replace(width=img.shape[2], height=img.shape[1])
    _print_config(cfg)
    if getattr(args, "dump_schedule", False):
        print(build_schedule(cfg.width, cfg.resolved_omega(), cfg.mode).describe())
    out, report = fn(img, cfg.target_conditioning(), cfg)
    _write_outputs(args, out, report)
    return 0


def _cmd_translate(args):
    return _translate_like(args, translate)


def _cmd_translate_free(args):
    return _translate_like(args, translate_freecontrol)


def _cmd_baseline(args):
    return _translate_like(args, baseline_translate)


def _cmd_seam_metric(args):
    img = read_png(args.input)
    rep = evalkit.seam_metric(img)
    print(f"wrap_gap = {rep.wrap_gap:.6e}")
    print(f"interior_gap = {rep.interior_gap:.6e}")
    print(f"seam_ratio = {rep.seam_ratio:.6f}")
    return 0


def _cmd_analyze_alpha(args):
    cfg = _resolve_config(args)
    _print_config(cfg)
    spec = ExtendSpec(cfg.resolved_alpha(), cfg.width, cfg.height)
    report = count_matching_windows(spec, cfg.resolved_omega())
    print(f"matching_windows = {report.count}")
    for wid in report.window_ids:
        print(f"match = {wid}")
    return 0


def _cmd_dump_schedule(args):
    cfg = _resolve_config(args)
    _print_config(cfg)
    print(build_schedule(cfg.width, cfg.resolved_omega(), cfg.mode).describe())
    return 0


def _cmd_sweep(args):
    cfg = _resolve_config(args)
    _print_config(cfg)
    corpus = [
        evalkit.synth_panorama(seed, cfg.width, cfg.height)
        for seed in range(args.corpus_start, args.corpus_start + args.corpus_size)
    ]
    alphas = [int(a) for a in args.alphas.split(",")]
    omegas = [int(o) for o in args.omegas.split(",")]
    modes = args.modes.split(",")
    rows = evalkit.sweep(corpus, alphas, omegas, modes, cfg,
                         include_timing=args.timing)
    text = evalkit.rows_to_csv(rows, include_timing=args.timing)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pant360",
        description="Training-free 360-degree panorama-to-panorama translation "
                    "on toy denoisers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, io_flags=True, report_flag=False):
        p = sub.add_parser(name, help=help_text)
        _add_pipeline_flags(p)
        if io_flags:
            p.add_argument("--input", required=True, help="input PNG")
            p.add_argument("--output", required=True, help="output file")
        if report_flag:
            p.add_argument("--report", help="write the run report here")
            p.add_argument("--dump-schedule", action="store_true",
                           dest="dump_schedule",
                           help="print window starts, stitch range, coverage")
        p.set_defaults(fn=fn)
        return p

    add("extend", _cmd_extend, "splice two copies of the panorama at alpha")
    add("invert", _cmd_invert, "DDIM-invert the extended input to a raw latent")
    add("translate", _cmd_translate,
        "boundary-encoded tiled translation (pnp or none control)",
        report_flag=True)
    add("translate-free", _cmd_translate_free,
        "energy-guided tiled translation from seeded noise", report_flag=True)
    add("baseline", _cmd_baseline,
        "non-extended untiled comparator translation", report_flag=True)

    p = sub.add_parser("seam-metric", help="wrap/interior column gap report")
    p.add_argument("--input", required=True, help="input PNG")
    p.set_defaults(fn=_cmd_seam_metric)

    p = sub.add_parser("analyze-alpha",
                       help="count schedule windows matching the input")
    _add_pipeline_flags(p)
    p.set_defaults(fn=_cmd_analyze_alpha)

    p = sub.add_parser("dump-schedule", help="print the window schedule")
    _add_pipeline_flags(p)
    p.set_defaults(fn=_cmd_dump_schedule)

    p = sub.add_parser("sweep", help="alpha/omega/mode sweep over a synthetic corpus")
    _add_pipeline_flags(p)
    p.add_argument("--corpus-size", type=int, default=20, dest="corpus_size")
    p.add_argument("--corpus-start", type=int, default=0, dest="corpus_start")
    p.add_argument("--alphas", required=True, help="comma-separated alpha values")
    p.add_argument("--omegas", required=True, help="comma-separated omega values")
    p.add_argument("--modes", default="paper", help="comma-separated modes")
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.add_argument("--timing", action="store_true",
                   help="append a wall_ms column (breaks byte-reproducibility)")
    p.set_defaults(fn=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except PantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
