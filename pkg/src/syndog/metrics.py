"""Binary-segmentation evaluation.

Heatmaps are binarized by iterative intermeans (isodata) thresholding on
the continuous pixel values, then scored against ground truth with IoU,
Dice and pixel accuracy. Batch evaluation over prediction/ground-truth
directories produces per-image rows, set means and bar-chart-ready data.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging

log = logging.getLogger(__name__)

THRESHOLD_TOL = 1e-4
THRESHOLD_MAX_ITER = 100
DEFAULT_T0 = 0.7

HEATMAP_SUFFIXES = (".png", ".npy")


def load_heatmap(path):
    """Load a heatmap: 8-bit PNG (v/255) or float dump (.npy).

    Values outside [0, 1] are clamped with a warning.
    """
    path = Path(path)
    if path.suffix.lower() == ".npy":
        values = imaging.load_float_dump(path)
    else:
        values = imaging.load_png_gray(path)
    if values.ndim != 2:
        raise ValueError(f"{path}: heatmap must be single-channel 2-D")
    if values.min() < 0.0 or values.max() > 1.0:
        warnings.warn(f"{path}: heatmap values outside [0, 1] were clamped")
        values = np.clip(values, 0.0, 1.0)
    return values


def iterative_threshold(heatmap, t0=DEFAULT_T0, tol=THRESHOLD_TOL, max_iter=THRESHOLD_MAX_ITER):
    """Intermeans iteration: t <- (mean below t + mean at/above t) / 2.

    Runs until the update moves less than ``tol`` or ``max_iter`` passes.
    When one side of the split is empty the new threshold is the mean of
    the non-empty side, which is a fixed point of the recurrence, so the
    degenerate (e.g. constant) case converges immediately.

    Returns ``(threshold, mask)`` with ``mask = heatmap >= threshold``.
    """
    if not 0.0 < t0 < 1.0:
        raise ValueError("initial threshold must lie in (0, 1)")
    values = np.asarray(heatmap, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("empty heatmap")

    t = float(t0)
    for _ in range(max_iter):
        lo = values[values < t]
        hi = values[values >= t]
        if lo.size == 0:
            t_new = float(hi.mean())
        elif hi.size == 0:
            t_new = float(lo.mean())
        else:
            t_new = 0.5 * (float(lo.mean()) + float(hi.mean()))
        if abs(t_new - t) < tol:
            t = t_new
            break
        t = t_new
    return t, np.asarray(heatmap, dtype=np.float64) >= t


def _counts(a, b):
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = int(np.count_nonzero(a & b))
    return a, b, inter


def iou(a, b):
    """Intersection over union; 1.0 when both masks are empty."""
    a, b, inter = _counts(a, b)
    union = int(np.count_nonzero(a | b))
    return 1.0 if union == 0 else inter / union


def dice(a, b):
    """Dice coefficient (the F1 score); 1.0 when both masks are empty."""
    a, b, inter = _counts(a, b)
    total = int(np.count_nonzero(a)) + int(np.count_nonzero(b))
    return 1.0 if total == 0 else 2.0 * inter / total


def pixel_accuracy(a, b):
    """Fraction of pixels on which the two masks agree."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return float(np.count_nonzero(a == b)) / a.size


def fbeta(pred, gt, beta=2.0):
    """True F-beta score of ``pred`` against ``gt``; 1.0 when both empty."""
    pred, gt, inter = _counts(pred, gt)
    np_, ng = int(np.count_nonzero(pred)), int(np.count_nonzero(gt))
    if np_ == 0 and ng == 0:
        return 1.0
    b2 = beta * beta
    denom = (1.0 + b2) * inter + b2 * (ng - inter) + (np_ - inter)
    return 0.0 if denom == 0 else (1.0 + b2) * inter / denom


@dataclass
class MetricReport:
    """Per-image rows and set means for one evaluation run."""

    rows: list = field(default_factory=list)   # dicts: name, iou, dice, fbeta2, accuracy, threshold
    unmatched_pred: list = field(default_factory=list)
    unmatched_gt: list = field(default_factory=list)
    t0: float = DEFAULT_T0
    pooled: dict | None = None

    @property
    def means(self):
        if not self.rows:
            return {}
        keys = ("iou", "dice", "fbeta2", "accuracy")
        return {k: float(np.mean([r[k] for r in self.rows])) for k in keys}

    def summary(self):
        means = self.means
        out = {
            "count": len(self.rows),
            "t0": self.t0,
            "mean_iou": means.get("iou"),
            "mean_dice": means.get("dice"),
            "mean_fbeta2": means.get("fbeta2"),
            "mean_accuracy_pct": None if not means else 100.0 * means["accuracy"],
            "unmatched_pred": self.unmatched_pred,
            "unmatched_gt": self.unmatched_gt,
        }
        if self.pooled is not None:
            out["pooled"] = self.pooled
        return out

    def chart_data(self):
        """Bar-chart-ready arrays: one label and one bar height per image
        and metric."""
        return {
            "labels": [r["name"] for r in self.rows],
            "iou": [r["iou"] for r in self.rows],
            "dice": [r["dice"] for r in self.rows],
            "fbeta2": [r["fbeta2"] for r in self.rows],
            "accuracy": [r["accuracy"] for r in self.rows],
        }


def _is_binary(values):
    unique = np.unique(values)
    return unique.size <= 2 and np.all(np.isin(unique, (0.0, 1.0)))


def _load_gt_mask(path):
    path = Path(path)
    if path.suffix.lower() == ".npy":
        return imaging.load_float_dump(path) >= 0.5
    return np.asarray(imaging.load_png_gray(path)) >= 0.5


def evaluate_pair(pred_values, gt_mask, t0=DEFAULT_T0):
    """Score one prediction (heatmap or already-binary) against a mask."""
    if _is_binary(pred_values):
        threshold, pred_mask = None, pred_values >= 0.5
    else:
        threshold, pred_mask = iterative_threshold(pred_values, t0=t0)
    return {
        "iou": iou(pred_mask, gt_mask),
        "dice": dice(pred_mask, gt_mask),
        "fbeta2": fbeta(pred_mask, gt_mask, beta=2.0),
        "accuracy": pixel_accuracy(pred_mask, gt_mask),
        "threshold": threshold,
    }, pred_mask


def evaluate_dirs(pred_dir, gt_dir, t0=DEFAULT_T0, pooled=False) -> MetricReport:
    """Evaluate matching filenames across two directories.

    Predictions may be heatmaps (thresholded at ``t0``) or binary masks
    (passed through). Unmatched files are reported and skipped; an empty
    intersection is an error. ``pooled=True`` additionally aggregates
    pixel counts over the whole set rather than averaging per image.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    preds = {p.stem: p for p in sorted(pred_dir.iterdir()) if p.suffix.lower() in HEATMAP_SUFFIXES}
    gts = {p.stem: p for p in sorted(gt_dir.iterdir()) if p.suffix.lower() in HEATMAP_SUFFIXES}
    shared = sorted(set(preds) & set(gts))
    report = MetricReport(
        t0=t0,
        unmatched_pred=sorted(set(preds) - set(gts)),
        unmatched_gt=sorted(set(gts) - set(preds)),
    )
    if not shared:
        raise ValueError(
            f"no filenames shared between {pred_dir} and {gt_dir}"
        )
    if report.unmatched_pred or report.unmatched_gt:
        log.warning(
            "evaluating %d pairs; ignoring %d unmatched predictions and %d unmatched masks",
            len(shared), len(report.unmatched_pred), len(report.unmatched_gt),
        )

    pool = np.zeros(4, dtype=np.int64)  # inter, union, agree, total
    for name in shared:
        pred_values = load_heatmap(preds[name])
        gt_mask = _load_gt_mask(gts[name])
        row, pred_mask = evaluate_pair(pred_values, gt_mask, t0=t0)
        row["name"] = name
        report.rows.append(row)
        if pooled:
            pool += (
                np.count_nonzero(pred_mask & gt_mask),
                np.count_nonzero(pred_mask | gt_mask),
                np.count_nonzero(pred_mask == gt_mask),
                gt_mask.size,
            )
    if pooled:
        inter, union, agree, total = (int(x) for x in pool)
        report.pooled = {
            "iou": 1.0 if union == 0 else inter / union,
            "accuracy": agree / total if total else 1.0,
        }
    return report


def report_to_csv(report: MetricReport, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "iou", "dice", "fbeta2", "accuracy", "threshold"])
        for row in report.rows:
            writer.writerow(
                [
                    row["name"],
                    f"{row['iou']:.6f}",
                    f"{row['dice']:.6f}",
                    f"{row['fbeta2']:.6f}",
                    f"{row['accuracy']:.6f}",
                    "" if row["threshold"] is None else f"{row['threshold']:.6f}",
                ]
            )


def report_to_json(report: MetricReport, path):
    doc = {
        "summary": report.summary(),
        "per_image": report.rows,
        "chart": report.chart_data(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
