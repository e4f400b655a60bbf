"""Binary mask representation, RLE codec, and set/overlap arithmetic.

Every IoU in the system bottoms out here. The interchange encoding is
row-major RLE whose first run counts zeros; runs alternate 0/1 and must
cover exactly height*width pixels. Canonical form allows at most one
zero-length run, at position 0 (present only when the raster starts
with a foreground pixel).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, MalformedRle, ShapeMismatch


@dataclass(frozen=True)
class BinaryMask:
    """Run-length encoded binary mask in the canonical row-major form."""

    height: int
    width: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        validate_rle(self)

    def to_dict(self) -> dict:
        return {"height": self.height, "width": self.width, "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, d: dict) -> "BinaryMask":
        return cls(height=int(d["height"]), width=int(d["width"]), counts=tuple(d["counts"]))


@dataclass(frozen=True, eq=False)
class DenseMask:
    """Decoded working form: row-major boolean raster."""

    height: int
    width: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.bits, dtype=bool)
        if arr.shape != (self.height, self.width):
            arr = arr.reshape(self.height, self.width)
        object.__setattr__(self, "bits", arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseMask):
            return NotImplemented
        return (
            self.height == other.height
            and self.width == other.width
            and bool(np.array_equal(self.bits, other.bits))
        )

    @classmethod
    def zeros(cls, height: int, width: int) -> "DenseMask":
        return cls(height, width, np.zeros((height, width), dtype=bool))

    @classmethod
    def from_pixels(cls, height: int, width: int, pixels) -> "DenseMask":
        """Build from an iterable of (row, col) foreground coordinates."""
        bits = np.zeros((height, width), dtype=bool)
        for r, c in pixels:
            bits[r, c] = True
        return cls(height, width, bits)


def validate_rle(mask: BinaryMask) -> None:
    """Raise MalformedRle unless counts are non-negative, cover the raster,
    and are in canonical form (no zero-length run past position 0)."""
    if mask.height <= 0 or mask.width <= 0:
        raise MalformedRle(f"non-positive dimensions {mask.height}x{mask.width}")
    counts = mask.counts
    if len(counts) == 0:
        raise MalformedRle("empty run list")
    if any(c < 0 for c in counts):
        raise MalformedRle("negative run length")
    total = sum(counts)
    expected = mask.height * mask.width
    if total != expected:
        raise MalformedRle(f"runs cover {total} pixels, raster has {expected}")
    if any(c == 0 for c in counts[1:]):
        raise MalformedRle("zero-length run past position 0")


def decode_rle(mask: BinaryMask) -> DenseMask:
    """Expand run lengths into the dense raster.

    Accepts any run list with non-negative counts summing to height*width;
    canonical-form checks are the concern of validate_rle / encode_rle.
    """
    if any(c < 0 for c in mask.counts):
        raise MalformedRle("negative run length")
    total = sum(mask.counts)
    expected = mask.height * mask.width
    if total != expected:
        raise MalformedRle(f"runs cover {total} pixels, raster has {expected}")
    flat = np.zeros(expected, dtype=bool)
    pos = 0
    value = False
    for run in mask.counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return DenseMask(mask.height, mask.width, flat.reshape(mask.height, mask.width))


def encode_rle(mask: DenseMask) -> BinaryMask:
    """Encode a raster into canonical RLE; round-trips with decode_rle."""
    flat = mask.bits.reshape(-1)
    n = flat.size
    # boundaries where the pixel value changes, scanning row-major
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], changes, [n]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs = [0] + runs
    return BinaryMask(mask.height, mask.width, tuple(int(r) for r in runs))


def _check_same_shape(a: DenseMask, b: DenseMask) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise ShapeMismatch(f"{a.height}x{a.width} vs {b.height}x{b.width}")


def union(masks: list[DenseMask]) -> DenseMask:
    """Pixelwise OR of one or more same-shape masks."""
    if not masks:
        raise EmptyInput("union of zero masks")
    first = masks[0]
    acc = first.bits.copy()
    for m in masks[1:]:
        _check_same_shape(first, m)
        np.logical_or(acc, m.bits, out=acc)
    return DenseMask(first.height, first.width, acc)


def intersection_union_counts(a: DenseMask, b: DenseMask) -> tuple[int, int]:
    """Exact pixel counts (|a & b|, |a | b|) as Python ints."""
    _check_same_shape(a, b)
    inter = int(np.count_nonzero(a.bits & b.bits))
    uni = int(np.count_nonzero(a.bits | b.bits))
    return inter, uni


def iou(a: DenseMask, b: DenseMask) -> float:
    """Intersection over union with a single final division.

    Defined as 0 when both masks are empty: valid ground truth is never
    empty, and 0 keeps detectability conservative for degenerate proposals.
    """
    inter, uni = intersection_union_counts(a, b)
    if uni == 0:
        return 0.0
    return inter / uni


def area(mask: DenseMask) -> int:
    return int(np.count_nonzero(mask.bits))


def iou_rle(a: BinaryMask, b: BinaryMask) -> float:
    """IoU computed directly on the run lists, without decoding.

    Second route for the dense/RLE equivalence property: walks both run
    streams and accumulates exact intersection/union pixel counts.
    """
    if (a.height, a.width) != (b.height, b.width):
        raise ShapeMismatch(f"{a.height}x{a.width} vs {b.height}x{b.width}")

    def runs(mask):
        value = False
        for c in mask.counts:
            if c:
                yield value, c
            value = not value

    inter = 0
    uni = 0
    it_a, it_b = runs(a), runs(b)
    va, ra = next(it_a, (False, 0))
    vb, rb = next(it_b, (False, 0))
    while ra and rb:
        step = min(ra, rb)
        if va and vb:
            inter += step
        if va or vb:
            uni += step
        ra -= step
        rb -= step
        if ra == 0:
            va, ra = next(it_a, (False, 0))
        if rb == 0:
            vb, rb = next(it_b, (False, 0))
    if uni == 0:
        return 0.0
    return inter / uni
