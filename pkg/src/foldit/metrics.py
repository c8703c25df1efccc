"""Per-frame Dice/IoU and sequence aggregation.

Conventions: two empty masks score 1.0; aggregate std is the population std
(ddof=0) over per-frame scores.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VS_GROUND_TRUTH = "vs-ground-truth"
TEXTURE_CONSISTENCY = "texture-consistency"


def _pair(a, b):
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def dice(a, b):
    a, b = _pair(a, b)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total


def iou(a, b):
    a, b = _pair(a, b)
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(a, b).sum()) / union


@dataclass
class MetricReport:
    dice: list
    iou: list
    label: str = VS_GROUND_TRUTH
    names: list = field(default_factory=list)

    @property
    def frame_count(self):
        return len(self.dice)

    @property
    def dice_mean(self):
        return float(np.mean(self.dice))

    @property
    def dice_std(self):
        return float(np.std(self.dice))

    @property
    def iou_mean(self):
        return float(np.mean(self.iou))

    @property
    def iou_std(self):
        return float(np.std(self.iou))

    def summary(self):
        return {
            "label": self.label,
            "frame_count": self.frame_count,
            "dice_mean": self.dice_mean,
            "dice_std": self.dice_std,
            "iou_mean": self.iou_mean,
            "iou_std": self.iou_std,
        }

    def to_dict(self):
        return {"summary": self.summary(), "names": list(self.names), "dice": list(self.dice), "iou": list(self.iou)}


def evaluate_sequence(pred_masks, ref_masks, label=VS_GROUND_TRUTH, names=None):
    if len(pred_masks) != len(ref_masks):
        raise ValueError(f"length mismatch: {len(pred_masks)} predictions vs {len(ref_masks)} references")
    if len(pred_masks) == 0:
        raise ValueError("empty sequence")
    d = [dice(p, r) for p, r in zip(pred_masks, ref_masks)]
    j = [iou(p, r) for p, r in zip(pred_masks, ref_masks)]
    return MetricReport(d, j, label, list(names) if names is not None else [])


def consistency(pred_masks_1, pred_masks_2, names=None):
    """Agreement between predictions on two renderings of the same geometry."""
    return evaluate_sequence(pred_masks_1, pred_masks_2, TEXTURE_CONSISTENCY, names)


def write_reports(reports, out_dir):
    """Write ``metrics.json`` and ``metrics.csv`` for a mapping of name -> MetricReport."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {key: r.to_dict() for key, r in reports.items()}
    (out_dir / "metrics.json").write_text(json.dumps(payload, indent=2) + "\n")
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["report", "label", "frame", "dice", "iou"])
        for key, r in reports.items():
            names = r.names or [str(i) for i in range(r.frame_count)]
            for n, d, j in zip(names, r.dice, r.iou):
                writer.writerow([key, r.label, n, f"{d:.6f}", f"{j:.6f}"])
    return out_dir / "metrics.json"
