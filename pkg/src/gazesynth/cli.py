"""Command-line entry point for batch synthesis.

Subcommands:

    validate       check a manifest, one PASS/FAIL line per record
    synthesize     run the full pipeline over a manifest
    sample-poses   dry-run the head-pose sampler to standard output
    gen-synthetic  write a synthetic dataset (sources + manifest + scenes)

A config file (--config) holds ``key = value`` lines using the same names
as the long flags (dashes as underscores); explicit flags win over the
file.  The effective synthesize configuration is echoed to
``<out>/run_config.json`` for reproducibility.

Exit codes: 0 success; 1 failed records / too many failed sources;
2 usage, config or input-format errors.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import GazeSynthError, ManifestError
from .geometry import CameraIntrinsics
from .pipeline import (
    AugmentationSchedule,
    SynthesisConfig,
    synthesize,
    validate_manifest,
)
from .rasterizer import VirtualCamera
from .sampler import PoseSamplerConfig, load_pose_list, sample_poses
from .synthetic import SyntheticFaceParams, write_synthetic_dataset

_SYNTH_DEFAULTS = {
    "sampler": "gaussian",
    "sigma": 20.0,
    "poses": 16,
    "rejection_norm": 80.0,
    "target_list": None,
    "ratio": "1:1:3",
    "weak_fraction": 0.5,
    "ambient_lo": 0.25,
    "ambient_hi": 0.75,
    "scene_dir": None,
    "blur_sigma": 4.0,
    "focal": 960.0,
    "render_px": 448,
    "output_px": 224,
    "seed": 0,
    "workers": 1,
    "failure_tolerance": 0.1,
}


def _parse_config_file(path) -> dict:
    """Flat ``key = value`` text; values are JSON scalars or bare strings."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        try:
            values[key] = json.loads(value)
        except json.JSONDecodeError:
            values[key] = value.strip("\"'")
    return values


def _merged_options(args, parser) -> dict:
    options = dict(_SYNTH_DEFAULTS)
    if getattr(args, "config", None):
        try:
            file_values = _parse_config_file(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config file: {exc}")
        unknown = set(file_values) - set(_SYNTH_DEFAULTS)
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        options.update(file_values)
    for key in _SYNTH_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    return options


def _build_synthesis_config(options) -> SynthesisConfig:
    ratio = options["ratio"]
    if isinstance(ratio, str):
        parts = ratio.split(":")
        if len(parts) != 3:
            raise ValueError(f"ratio must be black:color:scene, got {ratio!r}")
        ratio = tuple(float(p) for p in parts)
    sampler_mode = {"gaussian": "gaussian", "target-list": "target_list", "target_list": "target_list"}.get(
        str(options["sampler"])
    )
    if sampler_mode is None:
        raise ValueError(f"unknown sampler mode {options['sampler']!r}")
    target_poses = None
    if options["target_list"]:
        target_poses = load_pose_list(options["target_list"])
    sampler = PoseSamplerConfig(
        mode=sampler_mode,
        sigma_deg=float(options["sigma"]),
        poses_per_source=int(options["poses"]),
        rejection_norm_deg=float(options["rejection_norm"]),
    )
    schedule = AugmentationSchedule(
        ratio=ratio,
        weak_fraction=float(options["weak_fraction"]),
        ambient_range=(float(options["ambient_lo"]), float(options["ambient_hi"])),
        scene_dir=options["scene_dir"],
        blur_sigma=float(options["blur_sigma"]),
    )
    render_px = int(options["render_px"])
    camera = VirtualCamera(
        intrinsics=CameraIntrinsics(
            fx=float(options["focal"]),
            fy=float(options["focal"]),
            cx=render_px / 2.0,
            cy=render_px / 2.0,
        ),
        render_size=(render_px, render_px),
        output_size=(int(options["output_px"]), int(options["output_px"])),
    )
    return SynthesisConfig(
        sampler=sampler,
        schedule=schedule,
        camera=camera,
        seed=int(options["seed"]),
        workers=int(options["workers"]),
        failure_tolerance=float(options["failure_tolerance"]),
        target_poses=target_poses,
    )


def _add_synth_flags(sub):
    sub.add_argument("--sampler", choices=["gaussian", "target-list"])
    sub.add_argument("--sigma", type=float, help="gaussian prior std, degrees")
    sub.add_argument("--poses", type=int, help="poses per source")
    sub.add_argument("--rejection-norm", dest="rejection_norm", type=float)
    sub.add_argument("--target-list", dest="target_list", help="pitch/yaw list file")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--config", help="key = value config file; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazesynth",
        description="Synthesize novel-head-pose gaze training images from "
        "reconstructed face meshes.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    v = subs.add_parser("validate", help="check a source manifest")
    v.add_argument("--manifest", required=True)

    s = subs.add_parser("synthesize", help="run the synthesis pipeline")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True, help="output directory")
    _add_synth_flags(s)
    s.add_argument("--ratio", help="background ratio black:color:scene")
    s.add_argument("--weak-fraction", dest="weak_fraction", type=float)
    s.add_argument("--ambient-lo", dest="ambient_lo", type=float)
    s.add_argument("--ambient-hi", dest="ambient_hi", type=float)
    s.add_argument("--scene-dir", dest="scene_dir")
    s.add_argument("--blur-sigma", dest="blur_sigma", type=float)
    s.add_argument("--focal", type=float, help="virtual camera focal length, px")
    s.add_argument("--render-px", dest="render_px", type=int)
    s.add_argument("--output-px", dest="output_px", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--failure-tolerance", dest="failure_tolerance", type=float)

    p = subs.add_parser("sample-poses", help="print sampled (yaw, pitch) pairs")
    _add_synth_flags(p)
    p.add_argument("--sources", type=int, default=1, help="how many source batches")

    g = subs.add_parser("gen-synthetic", help="write a synthetic source dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--sources", type=int, default=2)
    g.add_argument("--interocular", type=float, default=60.0, help="eye distance, mm")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scene-images", dest="scene_images", type=int, default=3)

    return parser


def cmd_validate(args) -> int:
    try:
        report = validate_manifest(args.manifest)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in report.lines():
        print(line)
    print(f"{report.n_passed}/{len(report.entries)} records pass")
    return 0 if report.ok else 1


def cmd_synthesize(args, parser) -> int:
    options = _merged_options(args, parser)
    try:
        config = _build_synthesis_config(options)
    except (ValueError, GazeSynthError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(options, indent=2, default=str) + "\n")
    try:
        summary = synthesize(args.manifest, config, out)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GazeSynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"sources {summary.sources}  accepted {summary.accepted}  "
        f"outputs {summary.outputs}  failures {len(summary.failures)}  "
        f"elapsed {summary.elapsed_s:.1f}s"
    )
    for sid, reason in summary.failures:
        print(f"  failed {sid}: {reason}")
    return 0


def cmd_sample_poses(args, parser) -> int:
    options = _merged_options(args, parser)
    try:
        config = _build_synthesis_config(options)
    except (ValueError, GazeSynthError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    from dataclasses import replace

    for source_index in range(args.sources):
        sampler = replace(
            config.sampler, seed=np.random.SeedSequence((config.seed, 1, source_index))
        )
        poses = sample_poses(sampler, target_list=config.target_poses)
        for yaw, pitch in poses:
            print(f"{yaw:.6f} {pitch:.6f}")
    return 0


def cmd_gen_synthetic(args) -> int:
    try:
        params = SyntheticFaceParams(interocular_mm=args.interocular)
        manifest = write_synthetic_dataset(
            args.out,
            n_sources=args.sources,
            params=params,
            seed=args.seed,
            scene_images=args.scene_images,
        )
    except (ValueError, GazeSynthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.sources} sources; manifest at {manifest}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args)
    if args.command == "synthesize":
        return cmd_synthesize(args, parser)
    if args.command == "sample-poses":
        return cmd_sample_poses(args, parser)
    if args.command == "gen-synthetic":
        return cmd_gen_synthetic(args)
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
