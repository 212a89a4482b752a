"""Command line front end.

Every subcommand prints comma-separated records on stdout; report-style
subcommands also write a matplotlib figure when ``--figure`` is given.
Exit codes: 0 success, 1 failed self-test, 2 schema or usage error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import adc
from .core import Camera, project_to_rays
from .errors import (ConfigError, DegenerateMomentError, MomentSplatError, NumericOverflowError, ProxyDegenerateError,
                     SchemaError, UsageError)
from .io import dumps_json, load_image, load_scene, save_image, save_moments
from .metrics import compare
from .oracle import exact_optical_depth, isolated_opacity, oracle_render
from .proxy import confidence_proxy, ewa_proxy
from .render import RenderConfig, render
from .warp import unwarp

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_NUMERIC = 0, 1, 2, 3

# CLI flag -> RenderConfig field
CONFIG_FLAGS = {
    "moments": "moments", "n": "n", "theta": "theta", "lambda_": "lam", "near": "near", "far": "far",
    "N": "N", "kappa": "kappa", "beta": "beta", "confidence": "confidence", "proxy": "proxy",
    "deterministic": "deterministic", "threads": "threads", "seed": "seed",
}


def _add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("render configuration")
    g.add_argument("--config", type=Path, help="JSON file with RenderConfig keys")
    g.add_argument("--moments", choices=["power", "trig"])
    g.add_argument("--n", type=int, help="moment order")
    g.add_argument("--theta", type=float, help="trig guard angle (radians)")
    g.add_argument("--lambda", dest="lambda_", type=float, help="warp exponent")
    g.add_argument("--near", type=float)
    g.add_argument("--far", type=float)
    g.add_argument("--N", type=int, help="quadrature intervals per particle")
    g.add_argument("--kappa", type=float)
    g.add_argument("--beta", type=float, help="blend between lower and upper bound")
    g.add_argument("--confidence", type=float, help="proxy opacity level c")
    g.add_argument("--proxy", choices=["confidence", "ewa"])
    g.add_argument("--deterministic", action="store_true", default=None)
    g.add_argument("--threads", type=int)
    g.add_argument("--seed", type=int)


def _add_scene_args(p: argparse.ArgumentParser):
    p.add_argument("scene", type=Path, help="scene JSON file")
    p.add_argument("--camera", type=int, default=0, help="camera index in the scene file")
    p.add_argument("--size", type=int, nargs=2, metavar=("W", "H"), help="override the camera resolution")


def build_config(args) -> RenderConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{args.config}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    cfg = RenderConfig.from_dict(data)
    changes = {field: getattr(args, flag) for flag, field in CONFIG_FLAGS.items() if getattr(args, flag, None) is not None}
    if "moments" in changes and "n" not in changes and "n" not in data:
        changes["n"] = None  # fall back to the default order of the new kind
    return replace(cfg, **changes)


def load_view(args):
    scene, cams = load_scene(args.scene)
    if not cams:
        raise SchemaError(f"{args.scene}: no cameras defined", "cameras")
    if not 0 <= args.camera < len(cams):
        raise UsageError(f"camera index {args.camera} out of range (scene has {len(cams)})")
    cam = cams[args.camera]
    if args.size:
        w, h = args.size
        K = cam.K.copy()
        K[0] *= w / cam.width
        K[1] *= h / cam.height
        K[2] = (0.0, 0.0, 1.0)
        cam = Camera(K, cam.R, cam.t, w, h)
    return scene, cam


def _emit(rows, out=None):
    writer = csv.writer(out or sys.stdout, lineterminator="\n")
    for row in rows:
        writer.writerow(row)


def cmd_render(args):
    scene, cam = load_view(args)
    cfg = build_config(args)
    t0 = time.perf_counter()
    res = render(scene, cam, cfg)
    elapsed = time.perf_counter() - t0
    written = save_image(res.image.data, args.output)
    if args.moments_out:
        save_moments(args.moments_out, res.moments, cfg.moments, cfg.n, cfg.theta)
        written.append(Path(args.moments_out))
    meta = {"config": cfg.metadata(), "stats": res.stats.as_dict(), "seconds": elapsed,
            "files": [str(p) for p in written]}
    Path(args.output).with_suffix(".json").write_text(dumps_json(meta))
    _emit([["key", "value"], ["seconds", f"{elapsed:.3f}"]] + [[k, v] for k, v in res.stats.as_dict().items()]
          + [["file", str(p)] for p in written])
    return EXIT_OK


def cmd_oracle_render(args):
    scene, cam = load_view(args)
    cfg = build_config(args)
    t0 = time.perf_counter()
    img = oracle_render(scene, cam, cfg.near, cfg.far)
    written = save_image(img, args.output)
    _emit([["key", "value"], ["seconds", f"{time.perf_counter() - t0:.3f}"]] + [["file", str(p)] for p in written])
    return EXIT_OK


def cmd_compare(args):
    a, b = load_image(args.image_a), load_image(args.image_b)
    res = compare(a, b)
    psnr = "inf" if math.isinf(res.psnr) else f"{res.psnr:.6f}"
    _emit([["psnr_db", "mse", "mse_r", "mse_g", "mse_b", "max_abs_diff"],
           [psnr, f"{res.mse:.9g}", *(f"{v:.9g}" for v in res.mse_per_channel), f"{res.max_abs_diff:.9g}"]])
    if args.json:
        Path(args.json).write_text(dumps_json({"a": str(args.image_a), "b": str(args.image_b), **res.as_dict()}))
    if args.figure:
        from .plotting import compare_figure

        compare_figure(a, b, args.figure, (Path(args.image_a).name, Path(args.image_b).name), res.psnr)
    return EXIT_OK


def cmd_moments_dump(args):
    scene, cam = load_view(args)
    cfg = build_config(args)
    res = render(scene, cam, cfg)
    save_moments(args.output, res.moments, cfg.moments, cfg.n, cfg.theta, {"config": cfg.metadata()})
    _emit([["key", "value"], ["file", args.output], ["kind", cfg.moments], ["n", cfg.n],
           ["degenerate_pixels", res.stats.degenerate_pixels]])
    return EXIT_OK


def cmd_bounds_sweep(args):
    from .bounds import MomentSolver
    from .moments import particle_moments

    scene, cam = load_view(args)
    cfg = build_config(args)
    x, y = args.pixel
    if not (0 <= x < cam.width and 0 <= y < cam.height):
        raise UsageError(f"pixel ({x}, {y}) outside the {cam.width}x{cam.height} image")
    d = cam.pixel_directions(np.array([x + 0.5]), np.array([y + 0.5]))
    g1s = [tuple(float(v[0]) for v in project_to_rays(g, cam.center, d)) for g in scene.gaussians]
    size = cfg.moment_size
    m = np.zeros(size, dtype=float if cfg.moments == "power" else complex)
    for g1 in g1s:
        m += particle_moments(g1, cfg.warp, cfg.moments, cfg.n, cfg.theta)
    eta = np.linspace(0.0, 1.0, args.samples)
    lo, up = MomentSolver(cfg.moments, cfg.n, m[None], cfg.theta).bounds(np.zeros(args.samples, dtype=int), eta)
    tau = exact_optical_depth(g1s, unwarp(eta, cfg.warp), cfg.near)
    rows = [["eta", "lower", "upper", "tau_true"]] + [[f"{e:.6f}", f"{a:.9g}", f"{b:.9g}", f"{c:.9g}"]
                                                      for e, a, b, c in zip(eta, lo, up, tau)]
    if args.output:
        with open(args.output, "w", newline="") as fh:
            _emit(rows, fh)
    else:
        _emit(rows)
    if args.figure:
        from .plotting import bounds_sweep_figure

        bounds_sweep_figure(eta, lo, up, tau, args.figure, f"pixel ({x}, {y}), {cfg.moments} n={cfg.n}")
    return EXIT_OK


def cmd_proxy_debug(args):
    from .plotting import proxy_debug_figure

    scene, cam = load_view(args)
    cfg = build_config(args)
    if not 0 <= args.gaussian < len(scene):
        raise UsageError(f"Gaussian index {args.gaussian} out of range (scene has {len(scene)})")
    g = scene.gaussians[args.gaussian]
    dirs = cam.pixel_grid_directions().reshape(-1, 3)
    opac = isolated_opacity(g, cam.center, dirs, cfg.near).reshape(cam.height, cam.width)
    conf = confidence_proxy(g, cam, cfg.confidence, cfg.near)
    try:
        ewa = ewa_proxy(g, cam)
    except ProxyDegenerateError:
        ewa = None
    proxy_debug_figure(opac, conf, ewa, cfg.confidence, args.output, f"Gaussian {args.gaussian}")
    rows = [["proxy", "x0", "x1", "y0", "y1", "fallback", "near_flag"]]
    for name, p in (("confidence", conf), ("ewa", ewa)):
        if p is not None:
            rows.append([name, *p.rect, int(p.fallback), int(p.near_flag)])
    _emit(rows)
    return EXIT_OK


def cmd_split_optimize(args):
    res = adc.split_optimize()
    out = {"gamma": res.gamma, "delta": res.delta, "c": res.c, "objective": res.objective,
           "reference": {"gamma": adc.REFERENCE_SPLIT.gamma, "delta": adc.REFERENCE_SPLIT.delta,
                         "objective": adc.split_objective(adc.REFERENCE_SPLIT.gamma, adc.REFERENCE_SPLIT.delta)}}
    text = dumps_json(out)
    if args.output:
        Path(args.output).write_text(text)
    print(text)
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_all

    only = {int(v) for v in args.only.split(",")} if args.only else None
    failed = 0
    print("check,result,name,summary,seconds")
    for number, res in run_all(quick=args.quick, only=only):
        failed += not res.passed
        _emit([[number, "PASS" if res.passed else "FAIL", res.name, res.summary, f"{res.seconds:.2f}"]])
        sys.stdout.flush()
    return EXIT_FAIL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momentsplat", description="Moment-based Gaussian volume renderer.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a scene with the moment pipeline")
    _add_scene_args(p)
    p.add_argument("-o", "--output", required=True, help="output stem; writes .png, .pfm, .alpha.pfm, .json")
    p.add_argument("--moments-out", help="also write the per-pixel moment dump here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("oracle-render", help="render the reference image")
    _add_scene_args(p)
    p.add_argument("-o", "--output", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_oracle_render)

    p = sub.add_parser("compare", help="PSNR / MSE between two images (PFM or PNG)")
    p.add_argument("image_a", type=Path)
    p.add_argument("image_b", type=Path)
    p.add_argument("--json", help="write the metrics record here")
    p.add_argument("--figure", help="write a side-by-side difference figure here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("moments-dump", help="write the per-pixel moment buffer")
    _add_scene_args(p)
    p.add_argument("-o", "--output", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_moments_dump)

    p = sub.add_parser("bounds-sweep", help="CSV of L, U and exact optical depth along one pixel's ray")
    _add_scene_args(p)
    p.add_argument("--pixel", type=int, nargs=2, metavar=("X", "Y"), required=True)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("-o", "--output", help="CSV path (stdout when omitted)")
    p.add_argument("--figure", help="PNG path for the sweep plot")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bounds_sweep)

    p = sub.add_parser("proxy-debug", help="overlay of proxy outlines on a Gaussian's isolated opacity")
    _add_scene_args(p)
    p.add_argument("--gaussian", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="PNG path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_proxy_debug)

    p = sub.add_parser("split-optimize", help="optimize the split shrink and offset")
    p.add_argument("-o", "--output", help="JSON path")
    p.set_defaults(func=cmd_split_optimize)

    p = sub.add_parser("selftest", help="run the property suites")
    p.add_argument("--quick", action="store_true", help="reduced sample sizes")
    p.add_argument("--only", help="comma-separated check numbers")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ConfigError, UsageError) as exc:
        print(f"momentsplat: error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (NumericOverflowError, DegenerateMomentError, FloatingPointError) as exc:
        print(f"momentsplat: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MomentSplatError as exc:
        print(f"momentsplat: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
