"""Longitudinal lesion matching via Intersection over Boundary Cube.

Each follow-up lesion's bounding cube, mapped onto the baseline grid, is
compared against every baseline cube; overlap ratio greater than the
threshold (default 0) matches it to the argmax-overlap baseline lesion.
Many follow-up lesions may share one baseline parent. Reported volume
pairs always use native-grid voxel counts from both examinations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvariantViolation
from .labeling import BoundingCube, LesionRecord

CATEGORIES = ("grow", "shrink", "stable")


@dataclass(frozen=True)
class LesionMatch:
    """A matched baseline/follow-up lesion pair with native voxel counts."""

    prev_index: int
    follow_index: int
    ioc: float
    prev_voxels: int
    follow_voxels: int
    category: str | None = None


@dataclass(frozen=True)
class EmergeLesion:
    """Follow-up lesion with no baseline match; only its own volume is reported."""

    follow_index: int
    follow_voxels: int
    resampling_loss: bool = False


@dataclass(frozen=True)
class VanishLesion:
    """Baseline lesion never selected by any follow-up lesion."""

    prev_index: int
    prev_voxels: int


@dataclass(frozen=True)
class ComparisonReport:
    """Matched pairs plus the emerge/vanish partitions of a two-exam comparison."""

    matched: tuple[LesionMatch, ...]
    emerge: tuple[EmergeLesion, ...]
    vanish: tuple[VanishLesion, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "matched", tuple(self.matched))
        object.__setattr__(self, "emerge", tuple(self.emerge))
        object.__setattr__(self, "vanish", tuple(self.vanish))


def ioc(a: BoundingCube, b: BoundingCube) -> float:
    """Intersection volume of two cubes divided by the larger cube's volume.

    Cube volumes use inclusive bounds, prod(max - min + 1); disjoint
    cubes score 0. Cubes that share only a face, edge or corner voxel
    still intersect under inclusive bounds.
    """
    inter = 1
    for lo_a, hi_a, lo_b, hi_b in zip(a.min, a.max, b.min, b.max):
        lo = max(lo_a, lo_b)
        hi = min(hi_a, hi_b)
        if hi < lo:
            return 0.0
        inter *= hi - lo + 1
    return inter / max(a.volume_voxels, b.volume_voxels)


def match_lesions(
    prev: list[LesionRecord],
    registered_cubes: dict[int, BoundingCube],
    follow_native: list[LesionRecord],
    min_ioc: float = 0.0,
) -> tuple[list[LesionMatch], list[EmergeLesion]]:
    """Match each follow-up lesion to at most one baseline lesion.

    ``registered_cubes`` maps each follow-up lesion index to its bounding
    cube on the baseline grid (from nearest-neighbor label resampling).
    A follow-up lesion whose label vanished entirely during resampling is
    reported as emerged with ``resampling_loss`` set. Ties on equal
    overlap break toward the smaller baseline index; many-to-one matches
    are permitted.
    """
    if min_ioc < 0:
        raise InvariantViolation("min_ioc must be >= 0")
    matches: list[LesionMatch] = []
    emerge: list[EmergeLesion] = []
    for rec in follow_native:
        cube = registered_cubes.get(rec.index)
        if cube is None:
            emerge.append(EmergeLesion(rec.index, rec.voxel_count, resampling_loss=True))
            continue
        best_ioc = 0.0
        best_prev: LesionRecord | None = None
        for prev_rec in prev:
            value = ioc(cube, prev_rec.cube)
            if value > min_ioc and (
                value > best_ioc
                or (value == best_ioc and best_prev is not None and prev_rec.index < best_prev.index)
            ):
                best_ioc = value
                best_prev = prev_rec
        if best_prev is None:
            emerge.append(EmergeLesion(rec.index, rec.voxel_count))
        else:
            matches.append(LesionMatch(
                prev_index=best_prev.index,
                follow_index=rec.index,
                ioc=best_ioc,
                prev_voxels=best_prev.voxel_count,
                follow_voxels=rec.voxel_count,
            ))
    return matches, emerge


def classify_matches(
    matches: list[LesionMatch],
    emerge: list[EmergeLesion],
    prev: list[LesionRecord],
    tolerance: float = 0.0,
    params: dict | None = None,
) -> ComparisonReport:
    """Assign grow/shrink/stable categories and derive the vanish set.

    With ``tolerance`` t, a pair grows when follow > prev*(1+t), shrinks
    when follow < prev*(1-t), and is stable otherwise. Baseline lesions
    never selected by any match are reported as vanished.
    """
    if tolerance < 0:
        raise InvariantViolation("tolerance must be >= 0")
    classified = []
    for m in matches:
        if m.follow_voxels > m.prev_voxels * (1.0 + tolerance):
            category = "grow"
        elif m.follow_voxels < m.prev_voxels * (1.0 - tolerance):
            category = "shrink"
        else:
            category = "stable"
        classified.append(LesionMatch(
            prev_index=m.prev_index,
            follow_index=m.follow_index,
            ioc=m.ioc,
            prev_voxels=m.prev_voxels,
            follow_voxels=m.follow_voxels,
            category=category,
        ))
    selected = {m.prev_index for m in matches}
    vanish = [
        VanishLesion(rec.index, rec.voxel_count)
        for rec in prev
        if rec.index not in selected
    ]
    return ComparisonReport(
        matched=tuple(classified),
        emerge=tuple(emerge),
        vanish=tuple(vanish),
        params=dict(params or {}),
    )


def report_to_dict(report: ComparisonReport) -> dict:
    """JSON-ready form of a comparison report."""
    return {
        "matched": [
            {
                "prev_index": m.prev_index,
                "follow_index": m.follow_index,
                "ioc": m.ioc,
                "prev_voxels": m.prev_voxels,
                "follow_voxels": m.follow_voxels,
                "category": m.category,
            }
            for m in report.matched
        ],
        "emerge": [
            {
                "follow_index": e.follow_index,
                "follow_voxels": e.follow_voxels,
                "resampling_loss": e.resampling_loss,
            }
            for e in report.emerge
        ],
        "vanish": [
            {"prev_index": v.prev_index, "prev_voxels": v.prev_voxels}
            for v in report.vanish
        ],
        "params": report.params,
    }


def report_from_dict(payload: dict) -> ComparisonReport:
    """Rebuild a comparison report from its JSON form."""
    return ComparisonReport(
        matched=tuple(
            LesionMatch(
                prev_index=m["prev_index"],
                follow_index=m["follow_index"],
                ioc=m["ioc"],
                prev_voxels=m["prev_voxels"],
                follow_voxels=m["follow_voxels"],
                category=m.get("category"),
            )
            for m in payload.get("matched", [])
        ),
        emerge=tuple(
            EmergeLesion(
                follow_index=e["follow_index"],
                follow_voxels=e["follow_voxels"],
                resampling_loss=e.get("resampling_loss", False),
            )
            for e in payload.get("emerge", [])
        ),
        vanish=tuple(
            VanishLesion(prev_index=v["prev_index"], prev_voxels=v["prev_voxels"])
            for v in payload.get("vanish", [])
        ),
        params=dict(payload.get("params", {})),
    )
