"""Box-restricted binarization threshold segmentation.

Thresholding confined to operator-drawn bounding boxes: each box's patch
is binarized (Otsu-selected or manual threshold) and the per-box results
are superimposed onto a zero canvas of the full image size. Lesions dark
on the source image use ``dark`` polarity (foreground <= threshold).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvariantViolation
from .volume_io import load_grayscale

log = logging.getLogger(__name__)

POLARITIES = ("dark", "bright")


@dataclass(frozen=True)
class BoundingBox2D:
    """Inclusive pixel box from top-left (x0, y0) to bottom-right (x1, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int
    threshold: float | None = None

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise InvariantViolation(
                f"box corners out of order: ({self.x0},{self.y0})-({self.x1},{self.y1})"
            )
        if min(self.x0, self.y0) < 0:
            raise InvariantViolation("box coordinates must be non-negative")


def otsu_threshold(patch: np.ndarray) -> tuple[float, bool]:
    """Threshold maximizing between-class variance over the patch histogram.

    Returns ``(threshold, degenerate)``; a constant patch yields its own
    value with the degenerate flag set. Flat maxima are resolved to the
    midpoint of the maximizing plateau, so a two-level patch thresholds
    strictly between its levels.
    """
    flat = np.asarray(patch).ravel()
    if flat.size == 0:
        raise InvariantViolation("empty patch")
    if not np.issubdtype(flat.dtype, np.integer):
        flat = flat.astype(np.int64)
    lo = int(flat.min())
    hi = int(flat.max())
    if lo == hi:
        return float(lo), True

    values = flat.astype(np.int64) - lo
    hist = np.bincount(values, minlength=hi - lo + 1).astype(np.float64)
    total = hist.sum()
    levels = np.arange(hist.size, dtype=np.float64)

    w0 = np.cumsum(hist)
    sum0 = np.cumsum(hist * levels)
    w1 = total - w0
    mean0 = np.divide(sum0, w0, out=np.zeros_like(sum0), where=w0 > 0)
    mean1 = np.divide(sum0[-1] - sum0, w1, out=np.zeros_like(sum0), where=w1 > 0)
    between = w0 * w1 * (mean0 - mean1) ** 2
    between = between[:-1]  # a class split needs both sides nonempty

    peak = np.flatnonzero(between == between.max())
    return lo + float(peak.mean()), False


def _box_foreground(patch: np.ndarray, threshold: float, polarity: str) -> np.ndarray:
    if polarity == "dark":
        return patch <= threshold
    return patch >= threshold


def bbts_segment(
    image: np.ndarray,
    boxes: list[BoundingBox2D],
    polarity: str = "dark",
    manual_threshold: float | None = None,
) -> np.ndarray:
    """Segment lesions inside bounding boxes of a 2D grayscale image.

    Per box, the threshold is the box's own, else ``manual_threshold``,
    else Otsu over the patch. Returns a uint8 mask of the full image
    size; a constant patch with no manual threshold is skipped with a
    warning. The output is the union of the per-box results.
    """
    if polarity not in POLARITIES:
        raise InvariantViolation(f"polarity must be one of {POLARITIES}")
    image = np.asarray(image)
    if image.ndim != 2:
        raise InvariantViolation("bbts expects a 2D grayscale image")
    nx, ny = image.shape
    mask = np.zeros((nx, ny), dtype=np.uint8)
    for i, box in enumerate(boxes):
        if box.x1 >= nx or box.y1 >= ny:
            raise InvariantViolation(
                f"box {i} ({box.x0},{box.y0})-({box.x1},{box.y1}) exceeds image {nx}x{ny}"
            )
        patch = image[box.x0:box.x1 + 1, box.y0:box.y1 + 1]
        threshold = box.threshold if box.threshold is not None else manual_threshold
        if threshold is None:
            threshold, degenerate = otsu_threshold(patch)
            if degenerate:
                log.warning("box %d is constant-valued (%s); skipped", i, threshold)
                continue
        fg = _box_foreground(patch, threshold, polarity)
        mask[box.x0:box.x1 + 1, box.y0:box.y1 + 1] |= fg.astype(np.uint8)
    return mask


def load_boxes(path) -> list[BoundingBox2D]:
    """Read boxes.json: a list of {x0, y0, x1, y1, threshold?} objects."""
    with open(path) as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise InvariantViolation(f"{path}: boxes.json must contain a list")
    return [
        BoundingBox2D(
            x0=int(e["x0"]), y0=int(e["y0"]), x1=int(e["x1"]), y1=int(e["y1"]),
            threshold=e.get("threshold"),
        )
        for e in entries
    ]


def segment_image_file(image_path, boxes_path, polarity: str = "dark",
                       manual_threshold: float | None = None) -> np.ndarray:
    """Convenience wrapper: load image and boxes, return the mask array."""
    image = load_grayscale(Path(image_path))
    boxes = load_boxes(boxes_path)
    return bbts_segment(image, boxes, polarity=polarity, manual_threshold=manual_threshold)
