"""Closed boundary polylines of labeled 2D slices via Moore-neighbor tracing.

Every boundary pixel of every labeled region ends up on some closed
polyline: the outer boundary is traced first, then any untraced boundary
pixels (inner/hole boundaries) seed further traces. Pixel coordinates are
``(x, y)`` with x the column and y the row; slices are indexed ``[x, y]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# 8-neighborhood in clockwise screen order (x right, y down), starting west
_RING = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_RING_POS = {d: i for i, d in enumerate(_RING)}
_STRUCT_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Contour:
    """One closed polyline (first vertex == last) owned by a lesion."""

    lesion_index: int
    points: tuple[tuple[int, int], ...]

    def pixels(self) -> set[tuple[int, int]]:
        return set(self.points)


def _boundary_pixels(region: np.ndarray) -> set[tuple[int, int]]:
    """Pixels of a boolean region with a background 4-neighbor (or image edge)."""
    padded = np.pad(region, 1)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    xs, ys = np.nonzero(region & ~interior)
    return {(int(x), int(y)) for x, y in zip(xs, ys)}


def _trace_cycle(region: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbor trace of the boundary cycle through ``start``.

    The initial backtrack is the first background 4-neighbor of start in
    W/N/E/S order. The walk is a deterministic function of the
    (pixel, backtrack) state, so it stops when a state repeats: at that
    point one full boundary period has been captured.
    """
    nx, ny = region.shape

    def inside(px: int, py: int) -> bool:
        return 0 <= px < nx and 0 <= py < ny and region[px, py]

    sx, sy = start
    back = None
    for dx, dy in ((-1, 0), (0, -1), (1, 0), (0, 1)):
        if not inside(sx + dx, sy + dy):
            back = (sx + dx, sy + dy)
            break
    if back is None:
        # no background 4-neighbor; callers only pass boundary pixels
        return [start, start]

    points = [start]
    p, b = start, back
    seen = {(p, b)}
    while True:
        ring_start = _RING_POS[(b[0] - p[0], b[1] - p[1])]
        nxt = None
        new_b = b
        for k in range(1, 9):
            dx, dy = _RING[(ring_start + k) % 8]
            cand = (p[0] + dx, p[1] + dy)
            if inside(*cand):
                nxt = cand
                break
            new_b = cand
        if nxt is None:
            # isolated pixel: close the loop on itself
            return [start, start]
        p, b = nxt, new_b
        if (p, b) in seen:
            break
        seen.add((p, b))
        points.append(p)
    if points[-1] != start:
        points.append(start)
    return points


def trace_contours(slice_labels: np.ndarray) -> list[Contour]:
    """Trace closed boundary polylines for every labeled region of a slice.

    Regions are 8-connected groups of same-label pixels. Each trace
    starts at the topmost-leftmost untraced boundary pixel, so output
    order and geometry are deterministic.
    """
    slice_labels = np.asarray(slice_labels)
    if slice_labels.ndim != 2:
        raise ValueError("trace_contours expects a 2D labeled slice")
    contours: list[Contour] = []
    labels_present = np.unique(slice_labels)
    for label in labels_present:
        if label == 0:
            continue
        region_mask = slice_labels == label
        regions, n_regions = ndimage.label(region_mask, structure=_STRUCT_8)
        for region_id in range(1, n_regions + 1):
            region = regions == region_id
            boundary = _boundary_pixels(region)
            untraced = set(boundary)
            while untraced:
                # topmost (min y), then leftmost (min x)
                start = min(untraced, key=lambda q: (q[1], q[0]))
                cycle = _trace_cycle(region, start)
                contours.append(Contour(int(label), tuple(cycle)))
                visited = set(cycle)
                untraced -= visited
    return contours
