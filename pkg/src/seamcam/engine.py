"""Camouflage scoring: gating, top-K selection, subset-max detectability.

Detectability is the maximum IoU between the union of any non-empty
subset of kept proposal masks and the ground-truth union. The score is
one minus detectability; higher means harder to localize. The search is
exact: no heuristic is allowed to change the result, and an unoptimized
brute-force twin certifies the fast path.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, EmptyInput, InvalidRequest, ShapeMismatch
from .masks import BinaryMask, DenseMask, decode_rle, union

# 2^20 - 1 subset evaluations is the most the engine will ever attempt
K_HARD_CAP = 20


@dataclass(frozen=True)
class Proposal:
    """One candidate detection: box, text alignment, confidence, mask."""

    box: tuple[float, float, float, float]
    alpha: float
    beta: float
    mask: BinaryMask

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise InvalidRequest(f"alpha/beta outside [0,1]: {self.alpha}, {self.beta}")
        x0, y0, x1, y1 = self.box
        if not (x0 < x1 and y0 < y1):
            raise InvalidRequest(f"degenerate box {self.box}")

    def to_dict(self) -> dict:
        return {
            "box": list(self.box),
            "alpha": self.alpha,
            "beta": self.beta,
            "mask": self.mask.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Proposal":
        return cls(
            box=tuple(float(v) for v in d["box"]),
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            mask=BinaryMask.from_dict(d["mask"]),
        )


@dataclass(frozen=True)
class ScoringConfig:
    """Gate thresholds and enumeration cap. Defaults match the shipped metric."""

    tau_alpha: float = 0.50
    tau_beta: float = 0.10
    k_max: int = 7

    def __post_init__(self):
        if not (0.0 <= self.tau_alpha <= 1.0 and 0.0 <= self.tau_beta <= 1.0):
            raise ConfigError(f"thresholds outside [0,1]: {self.tau_alpha}, {self.tau_beta}")
        if self.k_max < 1:
            raise ConfigError(f"k_max must be positive, got {self.k_max}")
        if self.k_max > K_HARD_CAP:
            raise ConfigError(f"k_max {self.k_max} exceeds hard cap {K_HARD_CAP}")


@dataclass(frozen=True)
class ScoringRequest:
    image_id: str
    category: str
    gt_masks: tuple[BinaryMask, ...]
    proposals: tuple[Proposal, ...] = ()


@dataclass(frozen=True)
class ScoreResult:
    """Detectability D, score 1-D, and bookkeeping for the winning subset.

    intersection_px / union_px are the exact pixel counts behind D, kept
    so equality against the brute-force twin can be asserted before any
    division happens.
    """

    detectability: float
    score: float
    best_subset: tuple[int, ...]
    kept_count: int
    subsets_evaluated: int
    intersection_px: int = 0
    union_px: int = 0

    def to_dict(self) -> dict:
        return {
            "detectability": self.detectability,
            "score": self.score,
            "best_subset": list(self.best_subset),
            "kept_count": self.kept_count,
            "subsets_evaluated": self.subsets_evaluated,
            "intersection_px": self.intersection_px,
            "union_px": self.union_px,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreResult":
        return cls(
            detectability=float(d["detectability"]),
            score=float(d["score"]),
            best_subset=tuple(int(i) for i in d["best_subset"]),
            kept_count=int(d["kept_count"]),
            subsets_evaluated=int(d["subsets_evaluated"]),
            intersection_px=int(d.get("intersection_px", 0)),
            union_px=int(d.get("union_px", 0)),
        )


@dataclass(frozen=True)
class SubsetSearch:
    """Outcome of a detectability search over one kept-mask list."""

    d: float
    best_subset: tuple[int, ...]
    subsets_evaluated: int
    intersection_px: int
    union_px: int


def gate_proposals(proposals: list[Proposal], config: ScoringConfig) -> list[Proposal]:
    """Keep proposals with alpha >= tau_alpha and beta >= tau_beta (inclusive),
    preserving input order."""
    return [p for p in proposals if p.alpha >= config.tau_alpha and p.beta >= config.tau_beta]


def select_top_k(gated: list[Proposal], config: ScoringConfig) -> list[Proposal]:
    """Retain min(k_max, len(gated)) proposals ranked by confidence.

    Sort key: beta descending, then alpha descending, then input index
    ascending, so identical inputs always yield the identical kept list.
    """
    ranked = sorted(enumerate(gated), key=lambda t: (-t[1].beta, -t[1].alpha, t[0]))
    return [p for _, p in ranked[: config.k_max]]


def _better(inter: int, uni: int, subset: tuple[int, ...], incumbent) -> bool:
    """Strictly better under (IoU desc, cardinality asc, lexicographic asc).

    IoU comparison is exact via integer cross-multiplication; uni > 0 is
    guaranteed because the GT union is non-empty.
    """
    if incumbent is None:
        return True
    b_inter, b_uni, b_subset = incumbent
    lhs = inter * b_uni
    rhs = b_inter * uni
    if lhs != rhs:
        return lhs > rhs
    return (len(subset), subset) < (len(b_subset), b_subset)


def _as_bitset(mask: DenseMask) -> int:
    # trailing pad bits from packbits are zero, so popcounts are unaffected
    return int.from_bytes(np.packbits(mask.bits, axis=None).tobytes(), "big")


def detectability(
    proposal_masks: list[DenseMask], gt_union: DenseMask
) -> SubsetSearch:
    """Exact subset-max IoU over all 2^K - 1 non-empty subsets.

    Masks become big-int bitsets and a depth-first prefix extension adds
    one member per step, so each subset costs a single OR plus two
    popcounts. Enumeration is exhaustive; ties resolve to the smallest,
    lexicographically first subset.
    """
    _validate_search_input(proposal_masks, gt_union)
    k = len(proposal_masks)
    bits = [_as_bitset(m) for m in proposal_masks]
    gt = _as_bitset(gt_union)

    best = None  # (inter, uni, subset)
    evaluated = 0

    def extend(start: int, acc: int, subset: tuple[int, ...]):
        nonlocal best, evaluated
        for i in range(start, k):
            u = acc | bits[i]
            s = subset + (i,)
            inter = (u & gt).bit_count()
            uni = (u | gt).bit_count()
            evaluated += 1
            if _better(inter, uni, s, best):
                best = (inter, uni, s)
            extend(i + 1, u, s)

    extend(0, 0, ())
    inter, uni, subset = best
    return SubsetSearch(
        d=inter / uni,
        best_subset=subset,
        subsets_evaluated=evaluated,
        intersection_px=inter,
        union_px=uni,
    )


def detectability_bruteforce(
    proposal_masks: list[DenseMask], gt_union: DenseMask
) -> SubsetSearch:
    """Literal enumeration twin: recompute every subset union from scratch
    on the dense rasters. Must agree with detectability() exactly."""
    _validate_search_input(proposal_masks, gt_union)
    k = len(proposal_masks)
    gt_bits = gt_union.bits

    best = None  # (phi as Fraction, cardinality, subset, inter, uni)
    evaluated = 0
    for code in range(1, 1 << k):
        members = tuple(i for i in range(k) if code >> i & 1)
        u = union([proposal_masks[i] for i in members])
        inter = int(np.count_nonzero(u.bits & gt_bits))
        uni = int(np.count_nonzero(u.bits | gt_bits))
        evaluated += 1
        phi = Fraction(inter, uni)
        key = (phi, -len(members), tuple(-i for i in members))
        if best is None or key > best[0]:
            best = (key, members, inter, uni)
    _, members, inter, uni = best
    return SubsetSearch(
        d=inter / uni,
        best_subset=members,
        subsets_evaluated=evaluated,
        intersection_px=inter,
        union_px=uni,
    )


def _validate_search_input(proposal_masks: list[DenseMask], gt_union: DenseMask) -> None:
    if not proposal_masks:
        raise EmptyInput("no proposal masks")
    if len(proposal_masks) > K_HARD_CAP:
        raise ConfigError(f"{len(proposal_masks)} masks exceeds hard cap {K_HARD_CAP}")
    if not gt_union.bits.any():
        raise EmptyInput("ground-truth union is empty")
    for m in proposal_masks:
        if (m.height, m.width) != (gt_union.height, gt_union.width):
            raise ShapeMismatch(
                f"{m.height}x{m.width} vs gt {gt_union.height}x{gt_union.width}"
            )


def seamcam_score(request: ScoringRequest, config: ScoringConfig = ScoringConfig()) -> ScoreResult:
    """Full pipeline: gate -> top-K -> subset-max detectability -> 1 - D.

    With zero surviving proposals there is no category-consistent cue at
    all, which we treat as the limit of undetectability: D = 0, score = 1.
    best_subset indices refer to positions in the kept (post-top-K) list.
    """
    if not request.gt_masks:
        raise InvalidRequest("no ground-truth masks")
    dims = (request.gt_masks[0].height, request.gt_masks[0].width)
    for i, m in enumerate(request.gt_masks):
        if (m.height, m.width) != dims:
            raise InvalidRequest(f"gt mask {i} is {m.height}x{m.width}, expected {dims[0]}x{dims[1]}")
    for i, p in enumerate(request.proposals):
        if (p.mask.height, p.mask.width) != dims:
            raise InvalidRequest(
                f"proposal {i} mask is {p.mask.height}x{p.mask.width}, expected {dims[0]}x{dims[1]}"
            )

    gt = union([decode_rle(m) for m in request.gt_masks])
    if not gt.bits.any():
        raise InvalidRequest("ground-truth union is empty")

    kept = select_top_k(gate_proposals(list(request.proposals), config), config)
    if not kept:
        return ScoreResult(
            detectability=0.0,
            score=1.0,
            best_subset=(),
            kept_count=0,
            subsets_evaluated=0,
        )

    search = detectability([decode_rle(p.mask) for p in kept], gt)
    return ScoreResult(
        detectability=search.d,
        score=1.0 - search.d,
        best_subset=search.best_subset,
        kept_count=len(kept),
        subsets_evaluated=search.subsets_evaluated,
        intersection_px=search.intersection_px,
        union_px=search.union_px,
    )
