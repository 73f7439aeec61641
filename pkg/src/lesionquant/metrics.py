"""Segmentation evaluation: Dice, mIoU, precision, recall, F1.

Scores follow the usual confusion-count definitions; a 0/0 denominator
scores 1 when fp + fn == 0 (perfect empty agreement) and 0 otherwise,
so correctly-empty slices do not poison macro averages.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, MissingPair, ShapeMismatch
from .volume_io import load_grayscale

SCORE_NAMES = ("dice", "miou", "precision", "recall", "f1")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise InvariantViolation("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


def confusion(pred, gt) -> ConfusionCounts:
    """Elementwise confusion tallies of two binary arrays of equal shape."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    p = pred != 0
    g = gt != 0
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = p.size - tp - fp - fn
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(num: float, den: float, counts: ConfusionCounts) -> float:
    if den == 0:
        return 1.0 if counts.fp + counts.fn == 0 else 0.0
    return num / den


def scores(counts: ConfusionCounts) -> dict[str, float]:
    """Dice, mIoU, precision, recall and F1 from confusion counts."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    dice = _ratio(2 * tp, 2 * tp + fn + fp, counts)
    miou = _ratio(tp, tp + fn + fp, counts)
    precision = _ratio(tp, tp + fp, counts)
    recall = _ratio(tp, tp + fn, counts)
    f1 = _ratio(2 * recall * precision, precision + recall, counts)
    return {"dice": dice, "miou": miou, "precision": precision,
            "recall": recall, "f1": f1}


@dataclass(frozen=True)
class ScoreTable:
    """Per-image confusion counts and scores plus one aggregate row."""

    mode: str
    rows: tuple[dict, ...]
    aggregate: dict


def evaluate_set(pred_dir, gt_dir, mode: str = "micro") -> ScoreTable:
    """Evaluate every mask in pred_dir against its same-named ground truth.

    micro: scores of globally summed counts. macro: mean of per-image
    scores.
    """
    if mode not in ("micro", "macro"):
        raise InvariantViolation(f"mode must be micro or macro, got {mode!r}")
    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)
    pred_names = sorted(p.name for p in pred_dir.iterdir() if p.is_file())
    gt_names = sorted(p.name for p in gt_dir.iterdir() if p.is_file())
    if pred_names != gt_names:
        missing = sorted(set(pred_names) ^ set(gt_names))
        raise MissingPair(f"unpaired files: {missing}")
    if not pred_names:
        raise MissingPair(f"no files to evaluate in {pred_dir}")

    rows = []
    total = ConfusionCounts(0, 0, 0, 0)
    for name in pred_names:
        counts = confusion(load_grayscale(pred_dir / name), load_grayscale(gt_dir / name))
        total = total + counts
        rows.append({
            "name": name,
            "tp": counts.tp, "fp": counts.fp, "fn": counts.fn, "tn": counts.tn,
            **scores(counts),
        })

    if mode == "micro":
        aggregate = {
            "name": "micro",
            "tp": total.tp, "fp": total.fp, "fn": total.fn, "tn": total.tn,
            **scores(total),
        }
    else:
        aggregate = {"name": "macro",
                     "tp": total.tp, "fp": total.fp, "fn": total.fn, "tn": total.tn}
        for key in SCORE_NAMES:
            aggregate[key] = sum(row[key] for row in rows) / len(rows)
    return ScoreTable(mode=mode, rows=tuple(rows), aggregate=aggregate)


def write_score_csv(table: ScoreTable, path) -> None:
    fields = ["name", "tp", "fp", "fn", "tn", *SCORE_NAMES]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in table.rows:
            writer.writerow(row)
        writer.writerow(table.aggregate)


def score_table_to_dict(table: ScoreTable) -> dict:
    return {"mode": table.mode, "rows": list(table.rows), "aggregate": table.aggregate}


def write_score_json(table: ScoreTable, path, config: dict | None = None) -> None:
    payload = score_table_to_dict(table)
    if config is not None:
        payload["config"] = config
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
