"""Adapter command line: export proposal bundles for an image manifest."""

from __future__ import annotations

import argparse
import sys

from .backbones import BackboneUnavailable, available_backbones
from .export import AdapterConfig, export_bundles


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="seamcam-adapter")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="run a backbone and write bundle files")
    p.add_argument("--backbone", default="grounding-dino+sam2",
                   help=f"one of {available_backbones()} or a known variant")
    p.add_argument("--manifest", required=True, help="JSONL of image_id/path/species/gt_mask_paths")
    p.add_argument("--out", required=True, help="output bundles.jsonl")
    p.add_argument("--prompt-template", default="a {species}")
    p.add_argument("--device", default="cpu")

    args = parser.parse_args(argv)
    config = AdapterConfig(
        backbone=args.backbone,
        manifest=args.manifest,
        out_path=args.out,
        prompt_template=args.prompt_template,
        device=args.device,
    )
    try:
        exported, failed = export_bundles(config)
    except (BackboneUnavailable, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"exported={exported} failed={failed} out={args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
