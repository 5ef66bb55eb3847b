"""Command-line pipeline driver.

splatbind stage1|stage2|full <config.ini> runs the optimization stages and
writes their artifacts; render/animate/export work on saved artifacts;
validate-config checks an INI file without running anything.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from ..bind import (DeformationPlayer, DeformationStream, bake_free_cloud,
                    build_bound_asset)
from ..core import CameraPose
from ..optimize import run_stage1, run_stage2
from ..rasterizer import render
from .artifacts import build_provider, turntable_strip, write_loss_csv, \
    write_snapshot
from .config import ConfigError, dump_config, parse_config
from .io import load_bound_asset, load_gaussian_cloud, load_mesh, \
    save_bound_asset, save_gaussian_cloud, save_mesh, save_png


def _strip_size(stage_config) -> int:
    return min(256, stage_config.render_resolution)


def _mid_radius(stage_config) -> float:
    lo, hi = stage_config.radius_range
    return 0.5 * (lo + hi)


def _load_pipeline(args):
    cfg = parse_config(args.config, overrides=args.set, seed=args.seed,
                       provider=args.provider, out=args.out)
    cfg.validate()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_snapshot(cfg.output_dir, cfg)
    return cfg


def _run_stage1(cfg, checkpoint_every=None, resume=None):
    mesh = load_mesh(cfg.input_path)
    provider = build_provider(cfg.provider, cfg.stage1)
    out = cfg.output_dir
    result = run_stage1(mesh, cfg.stage1, provider,
                        checkpoint_path=out / "stage1.gdck",
                        checkpoint_every=checkpoint_every,
                        resume_from=resume)
    save_mesh(out / "stage1.mesh.ply", result.mesh)
    write_loss_csv(out / "stage1.loss.csv", result.history,
                   cfg.stage1.lr_position)
    strip = turntable_strip(result.surfels, _mid_radius(cfg.stage1),
                            _strip_size(cfg.stage1))
    save_png(out / "stage1.turntable.png", strip)
    print(f"stage1: {len(result.surfels)} surfels -> "
          f"{out / 'stage1.mesh.ply'} ({result.mesh.n_vertices} vertices)")
    return result


def _run_stage2(cfg, mesh, checkpoint_every=None, resume=None):
    provider = build_provider(cfg.provider, cfg.stage2)
    out = cfg.output_dir
    result = run_stage2(mesh, cfg.stage2, provider,
                        checkpoint_path=out / "stage2.gdck",
                        checkpoint_every=checkpoint_every,
                        resume_from=resume)
    write_loss_csv(out / "stage2.loss.csv", result.history,
                   cfg.stage2.lr_vertex)
    scene = result.asset if result.asset is not None else result.cloud
    if result.asset is not None:
        stem = save_bound_asset(out / "stage2", result.asset)
        print(f"stage2: bound asset at {stem}.gdba "
              f"({len(result.asset.colors)} gaussians)")
    else:
        save_gaussian_cloud(out / "stage2.baked.ply", result.cloud)
        print(f"stage2: {cfg.stage2.binding_mode} cloud at "
              f"{out / 'stage2.baked.ply'}")
    strip = turntable_strip(scene, _mid_radius(cfg.stage2),
                            _strip_size(cfg.stage2))
    save_png(out / "stage2.turntable.png", strip)
    return result


def cmd_stage1(args):
    cfg = _load_pipeline(args)
    _run_stage1(cfg, checkpoint_every=args.checkpoint_every,
                resume=args.resume)
    return 0


def cmd_stage2(args):
    cfg = _load_pipeline(args)
    mesh = load_mesh(cfg.input_path)
    _run_stage2(cfg, mesh, checkpoint_every=args.checkpoint_every,
                resume=args.resume)
    return 0


def cmd_full(args):
    cfg = _load_pipeline(args)
    stage1 = _run_stage1(cfg, checkpoint_every=args.checkpoint_every)
    _run_stage2(cfg, stage1.mesh, checkpoint_every=args.checkpoint_every)
    return 0


def cmd_validate_config(args):
    cfg = parse_config(args.config, overrides=args.set, seed=args.seed,
                       provider=args.provider, out=args.out)
    cfg.validate()
    if args.print_config:
        print(dump_config(cfg), end="")
    else:
        print(f"{args.config}: ok")
    return 0


def _load_scene(path):
    """Sniff an artifact path: bound-asset triple, cloud PLY, or mesh PLY."""
    path = Path(path)
    name = path.name
    if name.endswith(".gdba") or name.endswith(".mesh.ply") \
            or name.endswith(".baked.ply"):
        return load_bound_asset(path)
    try:
        cloud, _ = load_gaussian_cloud(path)
        return cloud
    except ValueError as cloud_error:
        try:
            # plain meshes render through a one-gaussian-per-face binding
            return build_bound_asset(load_mesh(path), n_per_face=1)
        except ValueError:
            raise ValueError(f"{path}: neither a splat cloud nor a mesh "
                             f"({cloud_error})") from None


def cmd_render(args):
    scene = _load_scene(args.asset)
    cam = CameraPose.orbit(azimuth_deg=args.azimuth,
                           elevation_deg=args.elevation, radius=args.radius,
                           width=args.size, height=args.size)
    save_png(args.out, render(scene, cam).color)
    print(f"rendered {args.asset} -> {args.out}")
    return 0


def cmd_animate(args):
    asset = load_bound_asset(args.asset)
    stream = DeformationStream.load(args.frames)
    player = DeformationPlayer(asset, stream)
    cam = CameraPose.orbit(azimuth_deg=args.azimuth,
                           elevation_deg=args.elevation, radius=args.radius,
                           width=args.size, height=args.size)
    frames = [render(scene, cam).color for _, scene in player]
    save_png(args.out, np.concatenate(frames, axis=1))
    print(f"animated {stream.n_frames} frames -> {args.out}")
    return 0


def cmd_export(args):
    asset = load_bound_asset(args.asset)
    save_gaussian_cloud(args.out, bake_free_cloud(asset))
    print(f"exported {args.asset} -> {args.out}")
    return 0


def _add_config_flags(sub):
    sub.add_argument("config", help="pipeline INI file")
    sub.add_argument("--seed", type=int, default=None,
                     help="override both stage seeds")
    sub.add_argument("--provider", default=None,
                     help="toy | oracle:<path> | remote:<host>:<port>")
    sub.add_argument("--out", default=None, help="override output directory")
    sub.add_argument("--set", action="append", default=[],
                     metavar="SECTION.KEY=VALUE",
                     help="override any config key (repeatable)")


def _add_run_flags(sub):
    sub.add_argument("--checkpoint-every", type=int, default=None,
                     help="write a checkpoint every N iterations")


def _add_view_flags(sub):
    sub.add_argument("--azimuth", type=float, default=30.0)
    sub.add_argument("--elevation", type=float, default=75.0)
    sub.add_argument("--radius", type=float, default=4.5)
    sub.add_argument("--size", type=int, default=256,
                     help="square frame size in pixels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splatbind",
        description="Two-stage mesh-bound Gaussian splatting pipeline")
    subs = parser.add_subparsers(dest="command", required=True)

    for name, fn in (("stage1", cmd_stage1), ("stage2", cmd_stage2),
                     ("full", cmd_full)):
        sub = subs.add_parser(name, help=f"run {name} and write artifacts")
        _add_config_flags(sub)
        _add_run_flags(sub)
        if name != "full":
            sub.add_argument("--resume", default=None,
                             help="checkpoint file to resume from")
        sub.set_defaults(func=fn)

    sub = subs.add_parser("validate-config",
                          help="check an INI file and exit")
    _add_config_flags(sub)
    sub.add_argument("--print-config", action="store_true",
                     help="print the fully resolved configuration")
    sub.set_defaults(func=cmd_validate_config)

    sub = subs.add_parser("render", help="render one view of an artifact")
    sub.add_argument("asset", help=".ply cloud/mesh or .gdba asset")
    sub.add_argument("--out", default="render.png")
    _add_view_flags(sub)
    sub.set_defaults(func=cmd_render)

    sub = subs.add_parser("animate",
                          help="play a deformation stream into a strip")
    sub.add_argument("asset", help=".gdba bound asset")
    sub.add_argument("--frames", required=True,
                     help="deformation stream file")
    sub.add_argument("--out", default="animate.png")
    _add_view_flags(sub)
    sub.set_defaults(func=cmd_animate)

    sub = subs.add_parser("export",
                          help="bake a bound asset to a viewer cloud")
    sub.add_argument("asset", help=".gdba bound asset")
    sub.add_argument("--out", default="export.ply")
    sub.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"splatbind: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"splatbind: missing input path: {e.filename or e}",
              file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as e:
        print(f"splatbind: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
