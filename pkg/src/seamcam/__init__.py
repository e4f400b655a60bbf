"""Camouflage detectability scoring and 2AFC study tooling."""

from .engine import (
    Proposal,
    ScoreResult,
    ScoringConfig,
    ScoringRequest,
    detectability,
    detectability_bruteforce,
    gate_proposals,
    seamcam_score,
    select_top_k,
)
from .masks import BinaryMask, DenseMask, area, decode_rle, encode_rle, iou, iou_rle, union

__all__ = [
    "BinaryMask",
    "DenseMask",
    "Proposal",
    "ScoreResult",
    "ScoringConfig",
    "ScoringRequest",
    "area",
    "decode_rle",
    "detectability",
    "detectability_bruteforce",
    "encode_rle",
    "gate_proposals",
    "iou",
    "iou_rle",
    "seamcam_score",
    "select_top_k",
    "union",
]

__version__ = "0.1.0"
