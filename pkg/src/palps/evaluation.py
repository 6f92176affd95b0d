"""Detection evaluation: greedy matching, average precision, density metrics
and learning-curve emission.

AP uses all-point (continuous) precision interpolation by default; the
older 11-point variant is available behind a flag. The IoU criterion is
strict: a detection matching a ground-truth box at exactly the threshold is
a false positive ("overlaps more than the threshold").
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .dataset import ImageRecord
from .detector import Detection, Detector
from .geometry import BoundingBox, iou


class UndefinedCorrelationError(ValueError):
    """Raised when a correlation denominator is zero (a constant vector)."""


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one image's detections against its ground truth.

    Entries are ordered by detection rank (score descending). A ``None`` in
    ``detection_matches`` marks a false positive; ground-truth boxes are
    matched at most once, so unmatched entries of ``gt_matched`` are the
    false negatives.
    """

    detection_scores: tuple[float, ...]
    detection_matches: tuple[int | None, ...]
    gt_matched: tuple[bool, ...]

    @property
    def tp_count(self) -> int:
        return sum(1 for m in self.detection_matches if m is not None)

    @property
    def fp_count(self) -> int:
        return sum(1 for m in self.detection_matches if m is None)

    @property
    def fn_count(self) -> int:
        return sum(1 for matched in self.gt_matched if not matched)

    def records(self) -> list[tuple[float, bool]]:
        """(score, is_true_positive) pairs in rank order."""
        return [
            (s, m is not None)
            for s, m in zip(self.detection_scores, self.detection_matches)
        ]


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[BoundingBox],
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Greedy one-to-one matching in descending score order.

    Each detection takes the unmatched ground-truth box with the highest IoU
    provided that IoU strictly exceeds the threshold; otherwise it is a false
    positive. Score ties are broken by (x_min, y_min) for determinism.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    ordered = sorted(
        dets,
        key=lambda d: (-d.score, d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max),
    )
    matched = [False] * len(gts)
    scores: list[float] = []
    matches: list[int | None] = []
    for det in ordered:
        best_iou, best_j = 0.0, None
        for j, gt in enumerate(gts):
            if matched[j]:
                continue
            value = iou(det.box, gt)
            if value > best_iou:
                best_iou, best_j = value, j
        if best_j is not None and best_iou > iou_threshold:
            matched[best_j] = True
            matches.append(best_j)
        else:
            matches.append(None)
        scores.append(det.score)
    return MatchResult(tuple(scores), tuple(matches), tuple(matched))


def average_precision(
    records: Iterable[tuple[float, bool]],
    total_gt: int,
    interpolation: str = "all_points",
) -> float:
    """Area under the precision-recall curve for ranked detections.

    ``records`` are (score, is_true_positive) pairs pooled over the test set.
    Conventions: no ground truth and no detections scores 1; no ground truth
    with any detection scores 0; detections absent entirely scores 0.
    """
    if total_gt < 0:
        raise ValueError("total_gt must be >= 0")
    recs = sorted(records, key=lambda r: -r[0])
    if total_gt == 0:
        return 1.0 if not recs else 0.0
    if not recs:
        return 0.0
    flags = np.array([tp for _, tp in recs], dtype=float)
    tp_cum = np.cumsum(flags)
    fp_cum = np.cumsum(1.0 - flags)
    recall = tp_cum / total_gt
    precision = tp_cum / (tp_cum + fp_cum)
    if interpolation == "all_points":
        mrec = np.concatenate(([0.0], recall, [recall[-1]]))
        mpre = np.concatenate(([1.0], precision, [0.0]))
        # Precision envelope: max precision at any recall >= r.
        mpre = np.maximum.accumulate(mpre[::-1])[::-1]
        idx = np.where(mrec[1:] != mrec[:-1])[0]
        return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))
    if interpolation == "eleven_point":
        total = 0.0
        for r in np.linspace(0.0, 1.0, 11):
            mask = recall >= r
            total += float(precision[mask].max()) if mask.any() else 0.0
        return total / 11.0
    raise ValueError(f"unknown interpolation {interpolation!r}")


def evaluate_detections(
    per_image: Sequence[tuple[Sequence[Detection], Sequence[BoundingBox]]],
    iou_threshold: float = 0.5,
    interpolation: str = "all_points",
) -> dict:
    """Match every image and pool the ranked records into a single AP."""
    records: list[tuple[float, bool]] = []
    total_gt = 0
    tp = fp = 0
    for dets, gts in per_image:
        result = match_detections(dets, gts, iou_threshold)
        records.extend(result.records())
        total_gt += len(gts)
        tp += result.tp_count
        fp += result.fp_count
    return {
        "map_at_50": average_precision(records, total_gt, interpolation),
        "total_gt": total_gt,
        "total_detections": len(records),
        "tp": tp,
        "fp": fp,
    }


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient; undefined for constant vectors."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise ValueError("pearson_r needs two equal-length vectors of size >= 2")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    denom = float(np.sqrt((dx * dx).sum()) * np.sqrt((dy * dy).sum()))
    if denom == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    return float((dx * dy).sum() / denom)


def rmse(x: Sequence[float], y: Sequence[float]) -> float:
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape or xs.size < 1:
        raise ValueError("rmse needs two equal-length non-empty vectors")
    return float(np.sqrt(np.mean((xs - ys) ** 2)))


@dataclass(frozen=True)
class DensityReport:
    """Predicted-vs-actual object counts over a test set."""

    pairs: tuple[tuple[str, int, int], ...]  # (image_id, predicted, actual)
    r: float
    rmse: float


def density_report(detector: Detector, model_state: Any, images: Sequence[ImageRecord]) -> DensityReport:
    """Per-image predicted count = number of detections; metrics over the set.

    Raises :class:`UndefinedCorrelationError` when either count vector is
    constant; equal non-constant vectors report r = 1.
    """
    pairs = []
    for img in images:
        out = detector.detect(model_state, img)
        pairs.append((img.id, len(out.detections), len(img.objects)))
    predicted = [p for _, p, _ in pairs]
    actual = [a for _, _, a in pairs]
    return DensityReport(
        pairs=tuple(pairs),
        r=pearson_r(predicted, actual),
        rmse=rmse(predicted, actual),
    )


def density_report_csv(report: DensityReport) -> str:
    """CSV of (image_id, predicted_count, actual_count) with a metrics footer."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["image_id", "predicted_count", "actual_count"])
    for image_id, predicted, actual in report.pairs:
        writer.writerow([image_id, predicted, actual])
    buf.write(f"# pearson_r={report.r!r}\r\n")
    buf.write(f"# rmse={report.rmse!r}\r\n")
    return buf.getvalue()


@dataclass(frozen=True)
class CurvePoint:
    method: str
    episode: int
    images_labeled: int
    annotation_hours: float
    map_at_50: float | None
    seed: int | None = None


def curve_points(logs: Sequence) -> list[CurvePoint]:
    """Extract one learning-curve point per episode log."""
    points = []
    for entry in logs:
        ledger = entry.ledger
        hours = float(ledger["seconds_total"]) / 3600.0 if isinstance(ledger, dict) else float(ledger.seconds_total) / 3600.0
        points.append(
            CurvePoint(
                method=entry.method,
                episode=entry.episode,
                images_labeled=entry.labeled_size,
                annotation_hours=hours,
                map_at_50=entry.eval.get("map_at_50") if entry.eval else None,
            )
        )
    return points


def emit_curves(logs: Sequence, include_seed: int | None = None) -> str:
    """CSV with columns (method, episode, images_labeled, annotation_hours,
    map_at_50); one row per episode. Hours come from the exact ledger."""
    if not logs:
        raise ValueError("emit_curves needs at least one episode log")
    buf = io.StringIO()
    writer = csv.writer(buf)
    header = ["method", "episode", "images_labeled", "annotation_hours", "map_at_50"]
    if include_seed is not None:
        header.insert(1, "seed")
    writer.writerow(header)
    for point in curve_points(logs):
        row = [
            point.method,
            point.episode,
            point.images_labeled,
            repr(point.annotation_hours),
            "" if point.map_at_50 is None else repr(point.map_at_50),
        ]
        if include_seed is not None:
            row.insert(1, include_seed)
        writer.writerow(row)
    return buf.getvalue()


def hours_to_target(points: Sequence[CurvePoint], target_map: float) -> float | None:
    """First time the curve reaches the target AP, linearly interpolated
    between episodes; None if never reached."""
    prev: CurvePoint | None = None
    for point in points:
        if point.map_at_50 is None:
            continue
        if point.map_at_50 >= target_map:
            if prev is None or prev.map_at_50 is None or point.map_at_50 == prev.map_at_50:
                return point.annotation_hours
            frac = (target_map - prev.map_at_50) / (point.map_at_50 - prev.map_at_50)
            return prev.annotation_hours + frac * (point.annotation_hours - prev.annotation_hours)
        prev = point
    return None
