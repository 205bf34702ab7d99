"""Greedy non-maximum suppression over axis-aligned or oriented detections."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

from .geometry import AxisAlignedBox, OrientedBox, iou_aabb, iou_obb
from .targets_losses import ClassLabel

KIND_AXIS = "axis"
KIND_ORIENTED = "oriented"


@dataclass(frozen=True)
class Detection:
    """One scored detection; the box type decides axis vs oriented kind."""

    cls: ClassLabel
    score: float
    box: Union[AxisAlignedBox, OrientedBox]

    def __post_init__(self) -> None:
        if self.cls == ClassLabel.BACKGROUND:
            raise ValueError("detections carry foreground classes only")
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score must lie in [0, 1], got {self.score}")
        if not isinstance(self.box, (AxisAlignedBox, OrientedBox)):
            raise TypeError(f"unsupported box type {type(self.box).__name__}")

    @property
    def kind(self) -> str:
        return KIND_AXIS if isinstance(self.box, AxisAlignedBox) else KIND_ORIENTED


def _pair_iou(a: Detection, b: Detection) -> float:
    if isinstance(a.box, AxisAlignedBox):
        return iou_aabb(a.box, b.box)
    return iou_obb(a.box, b.box)


def nms(dets: Sequence[Detection], iou_thresh: float, kind: str) -> list[Detection]:
    """Keep detections greedily by score, dropping overlaps above the threshold.

    All inputs must share the given kind and a single class; callers run one
    class at a time. Output keeps descending-score order, ties broken by
    input position, and a suppressed detection never suppresses others.
    """
    if kind not in (KIND_AXIS, KIND_ORIENTED):
        raise ValueError(f"kind must be 'axis' or 'oriented', got {kind!r}")
    if not (math.isfinite(iou_thresh) and 0.0 < iou_thresh < 1.0):
        raise ValueError(f"iou_thresh must lie in (0, 1), got {iou_thresh}")
    for d in dets:
        if d.kind != kind:
            raise ValueError(f"detection kind {d.kind!r} does not match {kind!r}")
    if dets and any(d.cls != dets[0].cls for d in dets):
        raise ValueError("nms runs per class; split mixed-class detections first")

    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: list[Detection] = []
    for i in order:
        cand = dets[i]
        if all(_pair_iou(cand, k) <= iou_thresh for k in kept):
            kept.append(cand)
    return kept
