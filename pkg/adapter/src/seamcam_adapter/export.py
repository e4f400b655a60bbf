"""Bundle exporter: run a backbone over an image manifest and emit one
proposal bundle per image in the engine's wire format.

Proposals are written raw (no gating, no top-K) so thresholds can be
swept offline. Per-image failures are logged and skipped; the run never
aborts on one bad image.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .backbones import make_backbone
from .rle import mask_payload

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: str
    species: str
    gt_mask_paths: tuple[str, ...]


@dataclass
class AdapterConfig:
    backbone: str
    manifest: str
    out_path: str
    prompt_template: str = "a {species}"
    device: str = "cpu"


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    entries = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                entries.append(
                    ManifestEntry(
                        image_id=str(obj["image_id"]),
                        path=str(obj["path"]),
                        species=str(obj["species"]),
                        gt_mask_paths=tuple(obj["gt_mask_paths"]),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
    return entries


def load_image(path: str) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"))


def load_gt_mask(path: str) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L")) > 0


def bundle_for_image(entry: ManifestEntry, backbone, prompt_template: str) -> dict:
    image = load_image(entry.path)
    h, w = image.shape[:2]
    if not entry.gt_mask_paths:
        raise ValueError(f"{entry.image_id}: no ground-truth masks; bundle would be invalid")
    gt_masks = []
    for mask_path in entry.gt_mask_paths:
        gt = load_gt_mask(mask_path)
        if gt.shape != (h, w):
            raise ValueError(
                f"{entry.image_id}: gt mask {mask_path} is {gt.shape}, image is {(h, w)}"
            )
        gt_masks.append(mask_payload(gt))

    prompt = prompt_template.format(species=entry.species)
    proposals = []
    for raw in backbone.propose(image, prompt):
        proposals.append(
            {
                "box": [float(v) for v in raw.box],
                "alpha": min(1.0, max(0.0, float(raw.alpha))),
                "beta": min(1.0, max(0.0, float(raw.beta))),
                "mask": mask_payload(raw.mask),
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "image_id": entry.image_id,
        "category": entry.species,
        "height": int(h),
        "width": int(w),
        "detector_id": backbone.detector_id,
        "proposals": proposals,
        "gt_masks": gt_masks,
        "adapter_meta": {
            "segment_prompt": backbone.segment_prompt,
            "prompt_template": prompt_template,
        },
    }


def export_bundles(config: AdapterConfig) -> tuple[int, int]:
    """Write one bundle per manifest image; returns (exported, failed)."""
    backbone = make_backbone(config.backbone, config.device)
    entries = load_manifest(config.manifest)
    exported = failed = 0
    out = Path(config.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        for entry in entries:
            try:
                bundle = bundle_for_image(entry, backbone, config.prompt_template)
            except Exception as exc:
                failed += 1
                print(f"{entry.image_id}: {type(exc).__name__}: {exc}", file=sys.stderr)
                continue
            fh.write(json.dumps(bundle, sort_keys=True) + "\n")
            exported += 1
    return exported, failed
