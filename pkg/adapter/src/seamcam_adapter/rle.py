"""Mask encoding for the bundle wire format.

The engine-side format is row-major RLE, zeros first, runs alternating
0/1, at most one zero-length run (leading, when the raster starts with a
foreground pixel). Third-party column-major run lists (the common COCO
uncompressed convention) are converted by decoding through a dense
raster, which preserves the pixel set exactly.
"""

from __future__ import annotations

import numpy as np


class ConversionError(Exception):
    """Third-party mask cannot be converted losslessly."""


def decode_counts(counts, height: int, width: int, order: str = "C") -> np.ndarray:
    """Expand alternating 0/1 run lengths into an (H, W) bool raster.

    order "C" scans row-major, "F" column-major (zeros first either way).
    """
    if order not in ("C", "F"):
        raise ConversionError(f"unknown scan order {order!r}")
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ConversionError("negative run length")
    if sum(counts) != height * width:
        raise ConversionError(
            f"runs cover {sum(counts)} pixels, raster has {height * width}"
        )
    flat = np.zeros(height * width, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    if order == "F":
        return flat.reshape((width, height)).T.copy()
    return flat.reshape((height, width))


def encode_row_major(bits: np.ndarray) -> list[int]:
    """Canonical row-major run list for a bool raster."""
    flat = np.asarray(bits, dtype=bool).reshape(-1)
    if flat.size == 0:
        raise ConversionError("empty raster")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], changes, [flat.size]))
    runs = [int(r) for r in np.diff(edges)]
    if flat[0]:
        runs = [0] + runs
    return runs


def mask_payload(bits: np.ndarray) -> dict:
    """Bundle-schema mask object for a bool raster."""
    h, w = bits.shape
    return {"height": int(h), "width": int(w), "counts": encode_row_major(bits)}


def convert_external_rle(obj: dict) -> dict:
    """Convert a third-party RLE mask object to the canonical form.

    Accepts {"size": [H, W], "counts": [...]} (column-major, zeros first)
    or an explicit {"height", "width", "counts", "order"}.
    """
    if "size" in obj:
        height, width = (int(v) for v in obj["size"])
        order = obj.get("order", "F")
    else:
        try:
            height, width = int(obj["height"]), int(obj["width"])
        except KeyError as exc:
            raise ConversionError(f"missing field {exc}") from exc
        order = obj.get("order", "C")
    if height <= 0 or width <= 0:
        raise ConversionError(f"non-positive dimensions {height}x{width}")
    if isinstance(obj.get("counts"), (bytes, str)):
        raise ConversionError("compressed string RLE is not supported")
    bits = decode_counts(obj["counts"], height, width, order=order)
    return mask_payload(bits)
