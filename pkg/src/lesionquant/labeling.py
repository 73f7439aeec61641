"""Connected-component lesion labeling and per-lesion statistics.

A binary mask is partitioned into lesions under 6/18/26-connectivity;
each lesion gets a voxel count, a physical volume and its minimal
axis-aligned bounding cube (inclusive voxel coordinates).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvariantViolation
from .volume_io import MaskVolume

CONNECTIVITIES = (6, 18, 26)

# scipy structuring elements: 6 = faces, 18 = faces+edges, 26 = full cube
_STRUCTS = {
    6: ndimage.generate_binary_structure(3, 1),
    18: ndimage.generate_binary_structure(3, 2),
    26: ndimage.generate_binary_structure(3, 3),
}


@dataclass(frozen=True)
class BoundingCube:
    """Axis-aligned bounding box with inclusive voxel-index bounds."""

    min: tuple[int, int, int]
    max: tuple[int, int, int]

    def __post_init__(self):
        lo = tuple(int(v) for v in self.min)
        hi = tuple(int(v) for v in self.max)
        if any(a > b for a, b in zip(lo, hi)):
            raise InvariantViolation(f"cube min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def volume_voxels(self) -> int:
        """Inclusive-bound box volume: prod(max - min + 1)."""
        n = 1
        for a, b in zip(self.min, self.max):
            n *= b - a + 1
        return n


@dataclass(frozen=True)
class LesionRecord:
    """One lesion's identity, size and bounding cube.

    ``index`` is the 1-based identifier after volume sorting; ``label``
    is the value this lesion carries in its source label map.
    """

    index: int
    voxel_count: int
    volume_mm3: float
    cube: BoundingCube
    label: int = 0

    def __post_init__(self):
        if self.voxel_count < 1:
            raise InvariantViolation("lesion voxel_count must be >= 1")


@dataclass(frozen=True)
class LesionLabelMap:
    """Integer label volume: 0 = background, k >= 1 = lesion k.

    Fresh output of :func:`label_components` has gapless labels
    1..lesion_count assigned in raster-scan order; maps that went through
    resampling keep their original label identities and may have gaps.
    """

    labels: np.ndarray
    spacing: tuple[float, float, float]
    lesion_count: int

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if labels.ndim != 3:
            raise InvariantViolation(f"label map must be 3D, got {labels.ndim}D")
        if labels.min(initial=0) < 0:
            raise InvariantViolation("labels must be non-negative")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "lesion_count", int(self.lesion_count))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.labels.shape


def _raster_flat(labels: np.ndarray) -> np.ndarray:
    """Flatten in raster order (x fastest, then y, then z)."""
    return labels.reshape(-1, order="F")


def label_components(mask: MaskVolume, connectivity: int = 26) -> LesionLabelMap:
    """Partition a binary mask into connected lesions.

    Labels are assigned 1..K in raster-scan order of each lesion's first
    voxel, so the labeling is deterministic regardless of the underlying
    sweep.
    """
    if connectivity not in _STRUCTS:
        raise InvariantViolation(f"connectivity must be one of {CONNECTIVITIES}")
    raw, count = ndimage.label(mask.data, structure=_STRUCTS[connectivity])
    if count == 0:
        return LesionLabelMap(np.zeros(mask.dims, dtype=np.int32), mask.spacing, 0)

    flat = _raster_flat(raw)
    uniq, first_idx = np.unique(flat, return_index=True)
    nonzero = uniq > 0
    order = np.argsort(first_idx[nonzero], kind="stable")
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[uniq[nonzero][order]] = np.arange(1, count + 1, dtype=np.int32)
    return LesionLabelMap(remap[raw], mask.spacing, count)


def extract_lesions(label_map: LesionLabelMap, min_voxels: int = 0) -> list[LesionRecord]:
    """Build one record per lesion with voxel_count >= min_voxels.

    Records are sorted by ascending voxel count (ties by first-voxel
    raster index) and re-indexed 1..K in that order.
    """
    if min_voxels < 0:
        raise InvariantViolation("min_voxels must be >= 0")
    labels = label_map.labels
    flat = _raster_flat(labels)
    uniq, first_idx = np.unique(flat, return_index=True)
    nonzero = uniq > 0
    present = uniq[nonzero]
    if present.size == 0:
        return []
    counts = np.bincount(flat, minlength=int(present.max()) + 1)
    first_seen = {int(lab): int(idx) for lab, idx in zip(present, first_idx[nonzero])}

    sx, sy, sz = label_map.spacing
    voxel_mm3 = sx * sy * sz
    objects = ndimage.find_objects(labels)

    selected = []
    for lab in present:
        lab = int(lab)
        count = int(counts[lab])
        if count < min_voxels:
            continue
        slc = objects[lab - 1]
        cube = BoundingCube(
            tuple(s.start for s in slc),
            tuple(s.stop - 1 for s in slc),
        )
        selected.append((count, first_seen[lab], lab, cube))

    selected.sort(key=lambda item: (item[0], item[1]))
    return [
        LesionRecord(index=i, voxel_count=count, volume_mm3=count * voxel_mm3,
                     cube=cube, label=lab)
        for i, (count, _, lab, cube) in enumerate(selected, start=1)
    ]


def lesion_center(cube: BoundingCube) -> tuple[float, float, float]:
    """Componentwise midpoint of a bounding cube (may be half-integer)."""
    return tuple((a + b) / 2.0 for a, b in zip(cube.min, cube.max))


def bounding_cubes(label_map: LesionLabelMap) -> dict[int, BoundingCube]:
    """Bounding cube per surviving label, keyed by label identity."""
    labels = label_map.labels
    present = np.unique(labels)
    present = present[present > 0]
    if present.size == 0:
        return {}
    objects = ndimage.find_objects(labels)
    cubes = {}
    for lab in present:
        slc = objects[int(lab) - 1]
        cubes[int(lab)] = BoundingCube(
            tuple(s.start for s in slc),
            tuple(s.stop - 1 for s in slc),
        )
    return cubes


def apply_record_indices(label_map: LesionLabelMap, records: list[LesionRecord]) -> LesionLabelMap:
    """Relabel a map so each lesion carries its record's sorted index.

    Lesions not present in ``records`` (below the volume threshold) are
    cleared to background.
    """
    remap = np.zeros(int(label_map.labels.max(initial=0)) + 1, dtype=np.int32)
    for rec in records:
        remap[rec.label] = rec.index
    return LesionLabelMap(remap[label_map.labels], label_map.spacing, len(records))
