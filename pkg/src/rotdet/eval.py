"""Detection evaluation: greedy matching, interpolated AP, and dataset scoring.

Matching is per image and per class: detections are visited in descending
score order and claim the highest-IoU unmatched ground truth of their class;
a claim below the IoU threshold, or no claim, is a false positive. Scored
flags are pooled across the dataset before the precision/recall curve is
integrated (all-point interpolation), so per-image work is independent and
can run on worker threads without changing any bit of the result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .geometry import (
    AxisAlignedBox,
    OrientedBox,
    iou_aabb,
    iou_obb,
    normalize_angle,
    obb_from_corners,
    rotate_aabb,
)
from .nms import KIND_AXIS, KIND_ORIENTED, Detection
from .targets_losses import FOREGROUND_CLASSES, ClassLabel

DEFAULT_IOU_THRESHOLDS = (0.4, 0.5, 0.6)

THREADS_ENV_VAR = "ROTDET_THREADS"


@dataclass(frozen=True)
class GroundTruthInstance:
    """One annotated object: class, axis-aligned box, angle, optional corners.

    The corner annotation, when present, overrides the rotated axis-aligned
    box as the oriented ground truth; packs that lack it fall back to
    rotating the axis-aligned box by the annotated angle.
    """

    cls: ClassLabel
    aabb: AxisAlignedBox
    angle: float
    obb_ann: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if self.cls == ClassLabel.BACKGROUND:
            raise ValueError("ground truth instances carry foreground classes only")
        object.__setattr__(self, "angle", normalize_angle(self.angle))
        if self.obb_ann is not None:
            pts = tuple((float(x), float(y)) for x, y in self.obb_ann)
            if len(pts) != 4 or not all(math.isfinite(v) for p in pts for v in p):
                raise ValueError(f"obb_ann must hold 4 finite points, got {self.obb_ann!r}")
            object.__setattr__(self, "obb_ann", pts)

    def oriented_box(self) -> OrientedBox:
        if self.obb_ann is not None:
            return obb_from_corners(self.obb_ann)
        return rotate_aabb(self.aabb, self.angle)


@dataclass(frozen=True)
class ImageSample:
    """Detections and ground truth for one image."""

    image_id: str
    detections: tuple[Detection, ...]
    ground_truths: tuple[GroundTruthInstance, ...]

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        object.__setattr__(self, "detections", tuple(self.detections))
        object.__setattr__(self, "ground_truths", tuple(self.ground_truths))


@dataclass(frozen=True)
class EvalResult:
    """APs per class and threshold, mean AP per threshold, and TP/FP/FN counts.

    A class with no ground truth anywhere in the dataset has AP None and is
    left out of the mean; the mean itself is None if no class is scorable.
    """

    kind: str
    thresholds: tuple[float, ...]
    ap: Mapping[float, Mapping[ClassLabel, float | None]]
    mean_ap: Mapping[float, float | None]
    counts: Mapping[float, Mapping[ClassLabel, tuple[int, int, int]]] = field(repr=False)


def _iou(kind: str, a, b) -> float:
    return iou_aabb(a, b) if kind == KIND_AXIS else iou_obb(a, b)


def _gt_box(gt: GroundTruthInstance, kind: str):
    return gt.aabb if kind == KIND_AXIS else gt.oriented_box()


def _check_kind(kind: str) -> None:
    if kind not in (KIND_AXIS, KIND_ORIENTED):
        raise ValueError(f"kind must be 'axis' or 'oriented', got {kind!r}")


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthInstance],
    iou_thresh: float,
    kind: str,
) -> list[bool]:
    """True/false positive flags aligned with the input detections.

    Detections are processed in descending score order (ties by position);
    each claims the unmatched same-class ground truth with the highest IoU,
    and is a true positive when that IoU reaches the threshold. A second
    detection of an already-claimed object is a false positive.
    """
    _check_kind(kind)
    if not (math.isfinite(iou_thresh) and 0.0 < iou_thresh < 1.0):
        raise ValueError(f"iou_thresh must lie in (0, 1), got {iou_thresh}")
    for d in dets:
        if d.kind != kind:
            raise ValueError(f"detection kind {d.kind!r} does not match {kind!r}")

    gt_boxes = [_gt_box(g, kind) for g in gts]
    matched = [False] * len(gts)
    flags = [False] * len(dets)
    for i in sorted(range(len(dets)), key=lambda i: (-dets[i].score, i)):
        det = dets[i]
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(gts):
            if matched[j] or gt.cls != det.cls:
                continue
            v = _iou(kind, det.box, gt_boxes[j])
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou >= iou_thresh:
            matched[best_j] = True
            flags[i] = True
    return flags


def average_precision(
    scored_flags: Sequence[tuple[float, bool]], n_gt: int
) -> float | None:
    """All-point interpolated AP from (score, is_true_positive) pairs.

    Returns None when there is no ground truth (the class is unscorable) and
    0.0 when there are no detections but ground truth exists.
    """
    if n_gt < 0:
        raise ValueError(f"n_gt must be non-negative, got {n_gt}")
    if n_gt == 0:
        return None
    order = sorted(range(len(scored_flags)), key=lambda i: (-scored_flags[i][0], i))
    recalls: list[float] = []
    precisions: list[float] = []
    tp = fp = 0
    for i in order:
        if scored_flags[i][1]:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / n_gt)
        precisions.append(tp / (tp + fp))

    # Interpolate each precision to the running maximum over higher recall.
    n = len(precisions)
    interp = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        interp[i] = max(precisions[i], interp[i + 1])
    ap = 0.0
    prev_recall = 0.0
    for i in range(n):
        ap += (recalls[i] - prev_recall) * interp[i]
        prev_recall = recalls[i]
    return ap


def _worker_count(max_workers: int | None) -> int:
    if max_workers is not None:
        if max_workers < 1:
            raise ValueError(f"max_workers must be positive, got {max_workers}")
        return max_workers
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV_VAR} must be positive, got {n}")
    return n


def _match_image(
    sample: ImageSample, thresholds: tuple[float, ...], kind: str
) -> dict[tuple[float, ClassLabel], list[tuple[float, bool]]]:
    out: dict[tuple[float, ClassLabel], list[tuple[float, bool]]] = {}
    try:
        for thresh in thresholds:
            flags = match_detections(sample.detections, sample.ground_truths, thresh, kind)
            for cls in FOREGROUND_CLASSES:
                out[(thresh, cls)] = [
                    (d.score, flags[i])
                    for i, d in enumerate(sample.detections)
                    if d.cls == cls
                ]
    except ValueError as exc:
        raise ValueError(f"image {sample.image_id!r}: {exc}") from exc
    return out


def evaluate_detections(
    dataset: Sequence[ImageSample],
    iou_thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
    kind: str = KIND_AXIS,
    max_workers: int | None = None,
) -> EvalResult:
    """Score a dataset of per-image detections against its ground truth.

    Matching happens within each image; the resulting scored flags are pooled
    across images per class before AP integration. Images are processed on
    up to ROTDET_THREADS workers (or max_workers when given) and assembled in
    dataset order, so the result does not depend on the worker count.
    """
    _check_kind(kind)
    thresholds = tuple(float(t) for t in iou_thresholds)
    if not thresholds:
        raise ValueError("need at least one IoU threshold")
    if len(set(thresholds)) != len(thresholds):
        raise ValueError(f"duplicate IoU thresholds in {thresholds}")
    seen_ids = set()
    for sample in dataset:
        if sample.image_id in seen_ids:
            raise ValueError(f"duplicate image_id {sample.image_id!r} in dataset")
        seen_ids.add(sample.image_id)

    workers = _worker_count(max_workers)
    if workers == 1 or len(dataset) <= 1:
        per_image = [_match_image(s, thresholds, kind) for s in dataset]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_image = list(
                pool.map(lambda s: _match_image(s, thresholds, kind), dataset)
            )

    n_gt = {cls: 0 for cls in FOREGROUND_CLASSES}
    for sample in dataset:
        for gt in sample.ground_truths:
            n_gt[gt.cls] += 1

    ap: dict[float, dict[ClassLabel, float | None]] = {}
    counts: dict[float, dict[ClassLabel, tuple[int, int, int]]] = {}
    mean_ap: dict[float, float | None] = {}
    for thresh in thresholds:
        ap[thresh] = {}
        counts[thresh] = {}
        scorable: list[float] = []
        for cls in FOREGROUND_CLASSES:
            pooled: list[tuple[float, bool]] = []
            for image in per_image:
                pooled.extend(image[(thresh, cls)])
            value = average_precision(pooled, n_gt[cls])
            ap[thresh][cls] = value
            tp = sum(1 for _, flag in pooled if flag)
            counts[thresh][cls] = (tp, len(pooled) - tp, n_gt[cls] - tp)
            if value is not None:
                scorable.append(value)
        mean_ap[thresh] = sum(scorable) / len(scorable) if scorable else None
    return EvalResult(kind=kind, thresholds=thresholds, ap=ap, mean_ap=mean_ap, counts=counts)


def confidence_sweep(
    dataset: Sequence[ImageSample],
    levels: Sequence[float],
    kind: str = KIND_AXIS,
    max_workers: int | None = None,
) -> list[tuple[float, float | None]]:
    """Mean AP at IoU 0.5 after dropping detections below each confidence level.

    Levels must be strictly increasing and inside (0, 1). Detections with
    score exactly at a level survive that level.
    """
    _check_kind(kind)
    levels = [float(v) for v in levels]
    if not levels:
        raise ValueError("need at least one confidence level")
    for prev, cur in zip(levels, levels[1:]):
        if cur <= prev:
            raise ValueError(f"levels must be strictly increasing, got {levels}")
    if levels[0] <= 0.0 or levels[-1] >= 1.0:
        raise ValueError(f"levels must lie strictly inside (0, 1), got {levels}")

    out: list[tuple[float, float | None]] = []
    for level in levels:
        filtered = [
            ImageSample(
                s.image_id,
                tuple(d for d in s.detections if d.score >= level),
                s.ground_truths,
            )
            for s in dataset
        ]
        result = evaluate_detections(filtered, (0.5,), kind, max_workers)
        out.append((level, result.mean_ap[0.5]))
    return out
