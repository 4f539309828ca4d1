"""Command-line entry point.

Subcommands: generate, ablate, probe, metrics, fixtures.
Exit codes: 0 success, 2 config error, 3 manifest error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

from . import bench, fixtures
from .config import load_config
from .errors import ConfigError, ManifestError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inbetween",
        description="Keyframe inbetweening benchmark harness (toy diffusion-transformer).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, manifest: bool = False) -> None:
        p.add_argument("--config", default=None, help="JSON config file (defaults built in)")
        p.add_argument("--seed", type=int, default=None, help="override dit.seed for this run")
        p.add_argument("--out", required=True, help="output directory for report.json")
        if manifest:
            p.add_argument("--manifest", required=True, help="JSONL benchmark manifest")

    gen = sub.add_parser("generate", help="sample every manifest entry and report metrics")
    add_common(gen, manifest=True)
    gen.add_argument(
        "--no-kab",
        action="store_true",
        help="disable the anchored attention bias (symmetric attention, no bias)",
    )
    gen.add_argument(
        "--baseline-fusion",
        action="store_true",
        help="use the asymmetric reference fusion: first image alone, last image and text joint",
    )
    gen.add_argument("--no-retro", action="store_true", help="disable temporal rescaling")

    abl = sub.add_parser("ablate", help="run the 2x2 bias/rescaling ablation grid")
    add_common(abl, manifest=True)

    prb = sub.add_parser("probe", help="content-free attention probe (vanilla vs rescaled)")
    add_common(prb)

    met = sub.add_parser("metrics", help="evaluate metrics on a stored video")
    met.add_argument("--video", required=True, help=".npy video or directory of images")
    met.add_argument("--reference", default=None, help="optional reference video for PSNR/SSIM")
    met.add_argument("--threshold", type=float, default=0.0, help="centroid intensity threshold")
    met.add_argument(
        "--pace-stride", type=int, default=1, help="frame stride for the pace-stability track"
    )
    met.add_argument("--out", required=True, help="output directory for report.json")

    fix = sub.add_parser("fixtures", help="write synthetic challenge videos and a manifest")
    fix.add_argument("--out", required=True, help="output directory")
    fix.add_argument("--frames", type=int, default=25, help="pixel frame count per fixture")
    fix.add_argument("--size", type=int, default=32, help="square frame size in pixels")
    fix.add_argument("--seed", type=int, default=0)

    return parser


def _fusion_mode(args: argparse.Namespace) -> str:
    if args.baseline_fusion:
        return "baseline"
    if args.no_kab:
        return "triple"
    return "kab"


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "fixtures":
        manifest = fixtures.write_fixture_set(args.out, F=args.frames, size=args.size, seed=args.seed)
        print(f"wrote fixture manifest to {manifest}")
        return 0
    if args.command == "metrics":
        report = bench.run_metrics(
            args.video,
            reference_path=args.reference,
            threshold=args.threshold,
            pace_stride=args.pace_stride,
        )
        path = bench.write_report(report, args.out)
        print(f"wrote {path}")
        return 0

    cfg = load_config(args.config)
    if args.command == "generate":
        report = bench.run_generate(
            args.manifest,
            cfg,
            seed=args.seed,
            fusion=_fusion_mode(args),
            retro_enabled=not args.no_retro,
        )
    elif args.command == "ablate":
        report = bench.run_ablate(args.manifest, cfg, seed=args.seed)
    elif args.command == "probe":
        report = bench.run_probe(cfg)
    else:  # pragma: no cover - argparse enforces the choices
        raise AssertionError(args.command)
    path = bench.write_report(report, args.out)
    print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return 3
    except (FloatingPointError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
