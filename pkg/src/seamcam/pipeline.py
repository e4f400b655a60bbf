"""Interchange schemas, batch scoring driver, synthetic oracle fixtures,
and preference-pair selection over precomputed candidates.

Bundle files are plain JSON: one object per file for single requests, one
object per line (JSONL) for batch streams. Field names are frozen and
documented in FORMATS.md; the engine never reads files itself.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .engine import (
    Proposal,
    ScoreResult,
    ScoringConfig,
    ScoringRequest,
    detectability_bruteforce,
    gate_proposals,
    seamcam_score,
    select_top_k,
)
from .errors import EmptyCandidates, MalformedRle, ParseError, VersionError
from .masks import BinaryMask, DenseMask, decode_rle, encode_rle, union

SCHEMA_VERSION = 1
MAX_DIMENSION = 16384


@dataclass(frozen=True)
class ProposalBundle:
    """Backbone-agnostic scoring input for one image.

    detector_id is recorded verbatim but never interpreted: backbone
    identity is metadata only, so any detector/segmenter pair that emits
    this schema plugs in unchanged.
    """

    image_id: str
    category: str
    height: int
    width: int
    detector_id: str
    proposals: tuple[Proposal, ...]
    gt_masks: tuple[BinaryMask, ...]
    schema_version: int = SCHEMA_VERSION

    def to_request(self) -> ScoringRequest:
        return ScoringRequest(
            image_id=self.image_id,
            category=self.category,
            gt_masks=self.gt_masks,
            proposals=self.proposals,
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "image_id": self.image_id,
            "category": self.category,
            "height": self.height,
            "width": self.width,
            "detector_id": self.detector_id,
            "proposals": [p.to_dict() for p in self.proposals],
            "gt_masks": [m.to_dict() for m in self.gt_masks],
        }


def bundle_from_dict(obj: dict, where: str = "bundle") -> ProposalBundle:
    """Validate and build a bundle; ParseError messages name the offending
    field or proposal index."""
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise VersionError(f"{where}: unknown schema_version {version!r}")
    try:
        height = int(obj["height"])
        width = int(obj["width"])
        image_id = str(obj["image_id"])
        category = str(obj["category"])
        detector_id = str(obj.get("detector_id", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}: missing or malformed header field ({exc})") from exc
    if not (1 <= height <= MAX_DIMENSION and 1 <= width <= MAX_DIMENSION):
        raise ParseError(f"{where}: dimensions {height}x{width} outside [1, {MAX_DIMENSION}]")

    gt_masks = []
    for j, m in enumerate(obj.get("gt_masks", [])):
        try:
            mask = BinaryMask.from_dict(m)
        except (KeyError, TypeError, ValueError, MalformedRle) as exc:
            raise ParseError(f"{where}: gt_masks[{j}]: {exc}") from exc
        if (mask.height, mask.width) != (height, width):
            raise ParseError(
                f"{where}: gt_masks[{j}] is {mask.height}x{mask.width}, bundle is {height}x{width}"
            )
        gt_masks.append(mask)
    if not gt_masks:
        raise ParseError(f"{where}: gt_masks must be non-empty")

    proposals = []
    for i, p in enumerate(obj.get("proposals", [])):
        try:
            prop = Proposal.from_dict(p)
        except Exception as exc:
            raise ParseError(f"{where}: proposals[{i}]: {exc}") from exc
        if (prop.mask.height, prop.mask.width) != (height, width):
            raise ParseError(
                f"{where}: proposals[{i}] mask is {prop.mask.height}x{prop.mask.width}, "
                f"bundle is {height}x{width}"
            )
        proposals.append(prop)

    return ProposalBundle(
        image_id=image_id,
        category=category,
        height=height,
        width=width,
        detector_id=detector_id,
        proposals=tuple(proposals),
        gt_masks=tuple(gt_masks),
    )


def load_bundle(path: str | Path) -> ProposalBundle:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return bundle_from_dict(obj, where=str(path))


def save_bundle(bundle: ProposalBundle, path: str | Path) -> None:
    Path(path).write_text(json.dumps(bundle.to_dict(), sort_keys=True) + "\n")


def iter_bundle_stream(path: str | Path) -> Iterator[ProposalBundle]:
    """Yield bundles from a JSONL stream, one per line."""
    path = Path(path)
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc.msg}") from exc
            yield bundle_from_dict(obj, where=f"{path}: line {lineno}")


def save_bundle_stream(bundles: Iterable[ProposalBundle], path: str | Path) -> int:
    count = 0
    with Path(path).open("w") as fh:
        for bundle in bundles:
            fh.write(json.dumps(bundle.to_dict(), sort_keys=True) + "\n")
            count += 1
    return count


@dataclass(frozen=True)
class BatchOutcome:
    """Per-bundle scoring outcome; failures carry an error string instead
    of aborting the batch."""

    image_id: str
    category: str
    result: ScoreResult | None
    error: str | None
    elapsed_s: float


def batch_score(
    bundles: Iterable[ProposalBundle],
    config: ScoringConfig = ScoringConfig(),
    workers: int = 1,
) -> list[BatchOutcome]:
    """Score every bundle; content is a pure function of (bundles, config),
    worker count only changes wall time. elapsed_s is engine time only."""

    def score_one(bundle: ProposalBundle) -> BatchOutcome:
        start = time.perf_counter()
        try:
            result = seamcam_score(bundle.to_request(), config)
        except Exception as exc:
            return BatchOutcome(
                bundle.image_id, bundle.category, None,
                f"{type(exc).__name__}: {exc}", time.perf_counter() - start,
            )
        return BatchOutcome(
            bundle.image_id, bundle.category, result, None, time.perf_counter() - start
        )

    items = list(bundles)
    if workers <= 1:
        return [score_one(b) for b in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(score_one, items))


SCORE_CSV_COLUMNS = (
    "image_id",
    "category",
    "detectability",
    "score",
    "kept_count",
    "subsets_evaluated",
    "best_subset",
)


def score_csv_row(outcome: BatchOutcome) -> list[str]:
    r = outcome.result
    return [
        outcome.image_id,
        outcome.category,
        repr(r.detectability),
        repr(r.score),
        str(r.kept_count),
        str(r.subsets_evaluated),
        ";".join(str(i) for i in r.best_subset),
    ]


@dataclass(frozen=True)
class Candidate:
    """One generated image scored against the original mask and category."""

    candidate_ref: str
    prompt_index: int
    score: ScoreResult


@dataclass(frozen=True)
class CandidateSet:
    source_image_id: str
    winner_ref: str
    candidates: tuple[Candidate, ...]


@dataclass(frozen=True)
class PreferencePair:
    """Winner (natural image) vs the strongest generated candidate.

    mask_source records that candidates were scored against the original
    ground-truth mask rather than a re-derived one.
    """

    winner_ref: str
    loser_ref: str
    loser_score: float
    margin: float
    loser_prompt_index: int
    mask_source: str = "original"

    def to_dict(self) -> dict:
        return {
            "winner_ref": self.winner_ref,
            "loser_ref": self.loser_ref,
            "loser_score": self.loser_score,
            "margin": self.margin,
            "loser_prompt_index": self.loser_prompt_index,
            "mask_source": self.mask_source,
        }


def select_hard_negative(candidate_set: CandidateSet) -> PreferencePair:
    """Pick the highest-scoring candidate as the dispreferred sample.

    Ties break to the lowest prompt index so pair files are reproducible.
    margin is the winner's lead over the runner-up (0 with one candidate).
    """
    if not candidate_set.candidates:
        raise EmptyCandidates(f"candidate set for {candidate_set.source_image_id} is empty")
    ranked = sorted(
        candidate_set.candidates, key=lambda c: (-c.score.score, c.prompt_index)
    )
    loser = ranked[0]
    margin = 0.0 if len(ranked) == 1 else loser.score.score - ranked[1].score.score
    return PreferencePair(
        winner_ref=candidate_set.winner_ref,
        loser_ref=loser.candidate_ref,
        loser_score=loser.score.score,
        margin=margin,
        loser_prompt_index=loser.prompt_index,
    )


def candidate_set_from_dict(obj: dict, where: str = "candidates") -> CandidateSet:
    try:
        candidates = tuple(
            Candidate(
                candidate_ref=str(c["candidate_ref"]),
                prompt_index=int(c["prompt_index"]),
                score=ScoreResult.from_dict(c["score"]),
            )
            for c in obj["candidates"]
        )
        return CandidateSet(
            source_image_id=str(obj["source_image_id"]),
            winner_ref=str(obj["winner_ref"]),
            candidates=candidates,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class SynthInstance:
    """Seeded synthetic scoring problem with brute-force ground truth."""

    seed: int
    height: int
    width: int
    gt_masks: tuple[BinaryMask, ...]
    proposals: tuple[Proposal, ...]
    oracle_detectability: float
    oracle_intersection_px: int
    oracle_union_px: int
    oracle_kept_count: int

    @property
    def image_id(self) -> str:
        return f"synth-{self.seed}"

    def to_bundle(self) -> ProposalBundle:
        return ProposalBundle(
            image_id=self.image_id,
            category="synthetic",
            height=self.height,
            width=self.width,
            detector_id="synthetic",
            proposals=self.proposals,
            gt_masks=self.gt_masks,
        )


def _random_rect_mask(rng: np.random.Generator, height: int, width: int) -> tuple[DenseMask, tuple]:
    y0 = int(rng.integers(0, height))
    x0 = int(rng.integers(0, width))
    y1 = int(rng.integers(y0 + 1, height + 1))
    x1 = int(rng.integers(x0 + 1, width + 1))
    bits = np.zeros((height, width), dtype=bool)
    bits[y0:y1, x0:x1] = True
    return DenseMask(height, width, bits), (float(x0), float(y0), float(x1), float(y1))


def _jittered(rng: np.random.Generator, base: DenseMask) -> tuple[DenseMask, tuple]:
    dy = int(rng.integers(-3, 4))
    dx = int(rng.integers(-3, 4))
    bits = np.zeros_like(base.bits)
    src = base.bits
    h, w = src.shape
    ys, xs = np.nonzero(src)
    ys = np.clip(ys + dy, 0, h - 1)
    xs = np.clip(xs + dx, 0, w - 1)
    bits[ys, xs] = True
    y_any, x_any = np.nonzero(bits)
    box = (float(x_any.min()), float(y_any.min()), float(x_any.max() + 1), float(y_any.max() + 1))
    return DenseMask(h, w, bits), box


def gen_synth_instance(
    seed: int,
    height: int = 32,
    width: int = 32,
    n_gt: int = 2,
    n_prop: int = 6,
    config: ScoringConfig = ScoringConfig(),
) -> SynthInstance:
    """Deterministic synthetic instance; the oracle fields come from the
    literal brute-force enumerator applied after the same gate/top-K the
    engine uses."""
    if n_prop > 10:
        raise ValueError("n_prop capped at 10 for synthetic instances")
    rng = np.random.default_rng(seed)

    gt_dense = [_random_rect_mask(rng, height, width)[0] for _ in range(max(1, n_gt))]
    gt_union = union(gt_dense)

    proposals = []
    for _ in range(n_prop):
        draw = rng.random()
        if draw < 0.5:
            base = gt_dense[int(rng.integers(0, len(gt_dense)))]
            mask, box = _jittered(rng, base)
        elif draw < 0.9:
            mask, box = _random_rect_mask(rng, height, width)
        else:
            # empty segmentation from a degenerate proposal
            _, box = _random_rect_mask(rng, height, width)
            mask = DenseMask.zeros(height, width)
        proposals.append(
            Proposal(
                box=box,
                alpha=float(rng.random()),
                beta=float(rng.random()),
                mask=encode_rle(mask),
            )
        )

    kept = select_top_k(gate_proposals(proposals, config), config)
    if kept:
        search = detectability_bruteforce([decode_rle(p.mask) for p in kept], gt_union)
        d, inter, uni = search.d, search.intersection_px, search.union_px
    else:
        d, inter, uni = 0.0, 0, 0
    return SynthInstance(
        seed=seed,
        height=height,
        width=width,
        gt_masks=tuple(encode_rle(m) for m in gt_dense),
        proposals=tuple(proposals),
        oracle_detectability=d,
        oracle_intersection_px=inter,
        oracle_union_px=uni,
        oracle_kept_count=len(kept),
    )
