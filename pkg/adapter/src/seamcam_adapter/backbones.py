"""Detector/segmenter backends behind one small interface.

Each backbone turns (image, category prompt) into raw proposals: box,
text-alignment alpha, confidence beta, and a box-prompted segmentation.
Gating and top-K happen downstream in the engine, never here, so sweeps
can re-threshold offline.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


class BackboneUnavailable(Exception):
    """Requested backbone has no local implementation or weights."""


@dataclass
class RawProposal:
    box: tuple[float, float, float, float]  # x0, y0, x1, y1 in pixels
    alpha: float
    beta: float
    mask: np.ndarray  # (H, W) bool


class MockBackbone:
    """Deterministic stand-in for CI: proposals are a pure function of
    (image bytes, category)."""

    detector_id = "mock"
    segment_prompt = "box"

    def propose(self, image: np.ndarray, category: str) -> list[RawProposal]:
        h, w = image.shape[:2]
        digest = hashlib.sha256(image.tobytes() + category.encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        proposals = []
        for _ in range(int(rng.integers(0, 6))):
            x0 = int(rng.integers(0, w - 1))
            y0 = int(rng.integers(0, h - 1))
            x1 = int(rng.integers(x0 + 1, w + 1))
            y1 = int(rng.integers(y0 + 1, h + 1))
            mask = np.zeros((h, w), dtype=bool)
            mask[y0:y1, x0:x1] = True
            proposals.append(
                RawProposal(
                    box=(float(x0), float(y0), float(x1), float(y1)),
                    alpha=float(rng.random()),
                    beta=float(rng.random()),
                    mask=mask,
                )
            )
        return proposals


class HuggingFaceBackbone:
    """Open-vocabulary detector + box-prompted SAM segmenter via
    transformers. Instantiated lazily; raises BackboneUnavailable when the
    stack or weights are missing."""

    def __init__(self, detector_id: str, detector_model: str, sam_model: str, device: str = "cpu"):
        self.detector_id = detector_id
        self.segment_prompt = "box"
        self.device = device
        try:
            import torch  # noqa: F401
            from transformers import (
                AutoModelForZeroShotObjectDetection,
                AutoProcessor,
                SamModel,
                SamProcessor,
            )
        except ImportError as exc:
            raise BackboneUnavailable(f"transformers/torch not installed: {exc}") from exc
        try:
            self._det_processor = AutoProcessor.from_pretrained(detector_model)
            self._detector = AutoModelForZeroShotObjectDetection.from_pretrained(
                detector_model
            ).to(device)
            self._sam_processor = SamProcessor.from_pretrained(sam_model)
            self._sam = SamModel.from_pretrained(sam_model).to(device)
        except Exception as exc:
            raise BackboneUnavailable(f"could not load weights: {exc}") from exc

    def propose(self, image: np.ndarray, category: str) -> list[RawProposal]:
        import torch
        from PIL import Image

        pil = Image.fromarray(image)
        h, w = image.shape[:2]
        text = [[category]]
        inputs = self._det_processor(images=pil, text=text, return_tensors="pt").to(self.device)
        with torch.no_grad():
            outputs = self._detector(**inputs)
        post = self._det_processor.post_process_grounded_object_detection(
            outputs, threshold=0.0, target_sizes=[(h, w)]
        )[0]
        proposals = []
        for box, score in zip(post["boxes"].tolist(), post["scores"].tolist()):
            x0, y0, x1, y1 = (float(v) for v in box)
            x0, x1 = max(0.0, min(x0, w - 1)), min(float(w), max(x1, x0 + 1))
            y0, y1 = max(0.0, min(y0, h - 1)), min(float(h), max(y1, y0 + 1))
            mask = self._segment(pil, (x0, y0, x1, y1), h, w)
            score = min(1.0, max(0.0, float(score)))
            # a single joint score: used for both gates, noted in metadata
            proposals.append(RawProposal((x0, y0, x1, y1), score, score, mask))
        return proposals

    def _segment(self, pil, box, h, w) -> np.ndarray:
        import torch

        inputs = self._sam_processor(pil, input_boxes=[[list(box)]], return_tensors="pt").to(
            self.device
        )
        with torch.no_grad():
            outputs = self._sam(**inputs)
        masks = self._sam_processor.image_processor.post_process_masks(
            outputs.pred_masks.cpu(),
            inputs["original_sizes"].cpu(),
            inputs["reshaped_input_sizes"].cpu(),
        )[0]
        scores = outputs.iou_scores.cpu().reshape(-1)
        best = int(torch.argmax(scores))
        return masks.reshape(-1, h, w)[best].numpy().astype(bool)


_REGISTRY = {
    "mock": lambda device: MockBackbone(),
    "grounding-dino+sam2": lambda device: HuggingFaceBackbone(
        "grounding-dino+sam2",
        "IDEA-Research/grounding-dino-tiny",
        "facebook/sam-vit-base",
        device,
    ),
    "owlv2+sam2": lambda device: HuggingFaceBackbone(
        "owlv2+sam2",
        "google/owlv2-large-patch14-ensemble",
        "facebook/sam-vit-base",
        device,
    ),
}

_KNOWN_UNIMPLEMENTED = {
    "sam3": "unified SAM-3 has no public local runtime here",
    "rex-omni+sam2": "Rex-Omni weights are not distributable here",
}


def available_backbones() -> list[str]:
    return sorted(_REGISTRY)


def make_backbone(name: str, device: str = "cpu"):
    if name in _REGISTRY:
        return _REGISTRY[name](device)
    if name in _KNOWN_UNIMPLEMENTED:
        raise BackboneUnavailable(f"{name}: {_KNOWN_UNIMPLEMENTED[name]}")
    raise BackboneUnavailable(f"unknown backbone {name!r}; known: {available_backbones()}")
