"""Annotation and detection files, plus a synthetic scene generator.

Both file formats are JSON Lines. Annotations hold one image per line:

    {"image_id": str, "width": int, "height": int,
     "instances": [{"cls": "gun" | "rifle",
                    "aabb": [x_min, y_min, x_max, y_max],
                    "angle_deg": float,
                    "obb_ann": [x0, y0, x1, y1, x2, y2, x3, y3]}]}

obb_ann is optional (corner annotations usually exist for test sets only)
and lists corners cyclically, starting at the low-longitudinal end edge.
Detections hold one detection per line:

    {"image_id": str, "cls": "gun" | "rifle", "score": float,
     "kind": "axis" | "oriented", "box": [4 or 8 floats]}

where an oriented box is serialized through its corner list.

The synthetic generator renders oriented bars into a feature grid and emits
oracle detections whose quality degrades with a noise knob: every detection
is the true box translated so its IoU with the truth is exactly
(1 - noise) / (1 + noise), scores sag with noise, and duplicate detections
appear with probability noise, always scoring below every primary detection.
The random draw sequence does not depend on noise, so scenes with the same
seed differ only in that controlled corruption.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .eval import GroundTruthInstance
from .geometry import (
    AxisAlignedBox,
    OrientedBox,
    enclosing_aabb,
    obb_corners,
    obb_from_corners,
    rotate_aabb,
)
from .nms import KIND_AXIS, KIND_ORIENTED, Detection
from .pooling import FeatureGrid
from .targets_losses import ClassLabel

logger = logging.getLogger(__name__)

_CLS_BY_NAME = {"gun": ClassLabel.GUN, "rifle": ClassLabel.RIFLE}
_NAME_BY_CLS = {v: k for k, v in _CLS_BY_NAME.items()}


@dataclass(frozen=True)
class SceneAnnotation:
    """Ground truth for one image; every box lies inside the image bounds."""

    image_id: str
    width: int
    height: int
    instances: tuple[GroundTruthInstance, ...]

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")
        object.__setattr__(self, "instances", tuple(self.instances))
        for gt in self.instances:
            box = gt.aabb
            if box.x_min < 0 or box.y_min < 0 or box.x_max > self.width or box.y_max > self.height:
                raise ValueError(
                    f"image {self.image_id!r}: box {box} exceeds image bounds "
                    f"{self.width}x{self.height}"
                )


def obb_rot(gt: GroundTruthInstance) -> OrientedBox:
    """Oriented box implied by the axis-aligned annotation and its angle."""
    return rotate_aabb(gt.aabb, gt.angle)


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------


def _parse_corners(flat: Sequence[float], where: str) -> tuple[tuple[float, float], ...]:
    if len(flat) != 8 or not all(
        isinstance(v, (int, float)) and math.isfinite(v) for v in flat
    ):
        raise ValueError(f"{where}: corner list must hold 8 finite numbers, got {flat!r}")
    vals = [float(v) for v in flat]
    return tuple((vals[i], vals[i + 1]) for i in range(0, 8, 2))


def _parse_cls(name, where: str) -> ClassLabel:
    cls = _CLS_BY_NAME.get(name)
    if cls is None:
        raise ValueError(f"{where}: unknown class {name!r}")
    return cls


def _read_jsonl(path: str) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def load_annotations(path: str) -> list[SceneAnnotation]:
    """Read a scene annotation file, normalizing angles and clamping boxes.

    Boxes poking past the image edge are clamped back in and counted in one
    warning; a box entirely outside the image, or inverted, is an error that
    names the offending image.
    """
    scenes: list[SceneAnnotation] = []
    seen: set[str] = set()
    clamped = 0
    for lineno, record in _read_jsonl(path):
        where = f"{path}:{lineno}"
        try:
            image_id = record["image_id"]
            width = record["width"]
            height = record["height"]
            raw_instances = record["instances"]
        except KeyError as exc:
            raise ValueError(f"{where}: missing field {exc}") from None
        if not isinstance(image_id, str) or not image_id:
            raise ValueError(f"{where}: image_id must be a non-empty string")
        if image_id in seen:
            raise ValueError(f"{where}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        where = f"{where}: image {image_id!r}"
        if not isinstance(width, int) or not isinstance(height, int):
            raise ValueError(f"{where}: width and height must be integers")

        instances = []
        for inst in raw_instances:
            cls = _parse_cls(inst.get("cls"), where)
            aabb = inst.get("aabb")
            if (
                not isinstance(aabb, list)
                or len(aabb) != 4
                or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in aabb)
            ):
                raise ValueError(f"{where}: aabb must hold 4 finite numbers, got {aabb!r}")
            x_min, y_min, x_max, y_max = (float(v) for v in aabb)
            if x_min >= x_max or y_min >= y_max:
                raise ValueError(f"{where}: box {aabb!r} has non-positive extent")
            fixed = (
                min(max(x_min, 0.0), float(width)),
                min(max(y_min, 0.0), float(height)),
                min(max(x_max, 0.0), float(width)),
                min(max(y_max, 0.0), float(height)),
            )
            if fixed != (x_min, y_min, x_max, y_max):
                clamped += 1
            if fixed[0] >= fixed[2] or fixed[1] >= fixed[3]:
                raise ValueError(f"{where}: box {aabb!r} lies outside the image")
            angle = inst.get("angle_deg")
            if not isinstance(angle, (int, float)) or not math.isfinite(angle):
                raise ValueError(f"{where}: angle_deg must be a finite number, got {angle!r}")
            corners = None
            if inst.get("obb_ann") is not None:
                corners = _parse_corners(inst["obb_ann"], where)
            instances.append(
                GroundTruthInstance(
                    cls=cls, aabb=AxisAlignedBox(*fixed), angle=float(angle), obb_ann=corners
                )
            )
        scenes.append(
            SceneAnnotation(
                image_id=image_id, width=width, height=height, instances=tuple(instances)
            )
        )
    if clamped:
        logger.warning("clamped %d box(es) to image bounds while reading %s", clamped, path)
    return scenes


def save_annotations(path: str, scenes: Sequence[SceneAnnotation]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for scene in scenes:
            instances = []
            for gt in scene.instances:
                inst = {
                    "cls": _NAME_BY_CLS[gt.cls],
                    "aabb": [gt.aabb.x_min, gt.aabb.y_min, gt.aabb.x_max, gt.aabb.y_max],
                    "angle_deg": gt.angle,
                }
                if gt.obb_ann is not None:
                    inst["obb_ann"] = [v for point in gt.obb_ann for v in point]
                instances.append(inst)
            record = {
                "image_id": scene.image_id,
                "width": scene.width,
                "height": scene.height,
                "instances": instances,
            }
            fh.write(json.dumps(record) + "\n")


def load_detections(path: str) -> list[tuple[str, Detection]]:
    """Read a detection file as (image_id, detection) pairs in file order."""
    out: list[tuple[str, Detection]] = []
    for lineno, record in _read_jsonl(path):
        where = f"{path}:{lineno}"
        try:
            image_id = record["image_id"]
            cls_name = record["cls"]
            score = record["score"]
            kind = record["kind"]
            box = record["box"]
        except KeyError as exc:
            raise ValueError(f"{where}: missing field {exc}") from None
        if not isinstance(image_id, str) or not image_id:
            raise ValueError(f"{where}: image_id must be a non-empty string")
        cls = _parse_cls(cls_name, where)
        if not isinstance(score, (int, float)):
            raise ValueError(f"{where}: score must be a number, got {score!r}")
        try:
            if kind == KIND_AXIS:
                if not (isinstance(box, list) and len(box) == 4):
                    raise ValueError(f"axis box must hold 4 numbers, got {box!r}")
                parsed = AxisAlignedBox(*(float(v) for v in box))
            elif kind == KIND_ORIENTED:
                parsed = obb_from_corners(_parse_corners(box, where))
            else:
                raise ValueError(f"kind must be 'axis' or 'oriented', got {kind!r}")
            det = Detection(cls=cls, score=float(score), box=parsed)
        except ValueError as exc:
            msg = str(exc)
            raise ValueError(msg if msg.startswith(where) else f"{where}: {msg}") from None
        out.append((image_id, det))
    return out


def save_detections(path: str, records: Sequence[tuple[str, Detection]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for image_id, det in records:
            if isinstance(det.box, AxisAlignedBox):
                box = [det.box.x_min, det.box.y_min, det.box.x_max, det.box.y_max]
            else:
                box = [v for point in obb_corners(det.box) for v in point]
            record = {
                "image_id": image_id,
                "cls": _NAME_BY_CLS[det.cls],
                "score": det.score,
                "kind": det.kind,
                "box": box,
            }
            fh.write(json.dumps(record) + "\n")


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthParams:
    n_instances: int = 4
    noise: float = 0.0
    size: int = 96
    channels: int = 8

    def __post_init__(self) -> None:
        if self.n_instances < 1:
            raise ValueError(f"n_instances must be positive, got {self.n_instances}")
        if not (math.isfinite(self.noise) and 0.0 <= self.noise < 1.0):
            raise ValueError(f"noise must lie in [0, 1), got {self.noise}")
        if self.size < 48:
            raise ValueError(f"size must be at least 48, got {self.size}")
        if self.channels < 1:
            raise ValueError(f"channels must be positive, got {self.channels}")


@dataclass(frozen=True)
class SyntheticScene:
    features: FeatureGrid
    annotations: SceneAnnotation
    oracle_detections: tuple[Detection, ...] = field(repr=False)


def _disjoint_with_gap(a: AxisAlignedBox, b: AxisAlignedBox, gap: float) -> bool:
    return (
        a.x_max + gap <= b.x_min
        or b.x_max + gap <= a.x_min
        or a.y_max + gap <= b.y_min
        or b.y_max + gap <= a.y_min
    )


def _place_bar(
    rng: np.random.Generator, size: int, occupied: list[AxisAlignedBox], index: int
) -> OrientedBox:
    margin = 2.0
    for _ in range(100):
        half_len = rng.uniform(6.0, 14.0)
        half_wid = half_len * rng.uniform(0.22, 0.45)
        theta = rng.uniform(0.0, 180.0)
        probe = OrientedBox(0.0, 0.0, half_len, half_wid, theta)
        ext = enclosing_aabb(probe)
        ex, ey = ext.x_max, ext.y_max
        cx = rng.uniform(margin + ex, size - margin - ex)
        cy = rng.uniform(margin + ey, size - margin - ey)
        bar = OrientedBox(cx, cy, half_len, half_wid, theta)
        around = enclosing_aabb(bar)
        if all(_disjoint_with_gap(around, other, 2.0) for other in occupied):
            occupied.append(around)
            return bar
    raise ValueError(
        f"could not place instance {index} after 100 attempts; "
        "lower n_instances or raise size"
    )


def generate_synthetic_scene(seed: int, params: SynthParams = SynthParams()) -> SyntheticScene:
    """Render a deterministic scene of oriented bars with oracle detections.

    At noise 0 the detections reproduce the ground truth exactly with score
    1.0. For noise n > 0 every box is translated (axis-aligned boxes along an
    image axis, oriented boxes along their longitudinal axis) by n times its
    extent, which lands the IoU against the truth at exactly (1-n)/(1+n).
    """
    rng = np.random.default_rng(seed)
    size, channels = params.size, params.channels
    noise = params.noise

    waves = [
        (rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0 * math.pi))
        for _ in range(channels)
    ]

    occupied: list[AxisAlignedBox] = []
    instances: list[GroundTruthInstance] = []
    detections: list[Detection] = []
    bumps: list[tuple[OrientedBox, np.ndarray]] = []
    for index in range(params.n_instances):
        bar = _place_bar(rng, size, occupied, index)
        cls = ClassLabel.GUN if rng.random() < 0.5 else ClassLabel.RIFLE
        axis_is_y = rng.random() < 0.5
        axis_sign = 1.0 if rng.random() < 0.5 else -1.0
        long_sign = 1.0 if rng.random() < 0.5 else -1.0
        score_u = rng.uniform(0.0, 0.4)
        dup_u = rng.random()
        dup_gap = rng.uniform(0.05, 0.35)
        weights = rng.uniform(0.5, 1.5, size=channels)

        aabb = enclosing_aabb(bar)
        instances.append(
            GroundTruthInstance(
                cls=cls,
                aabb=aabb,
                angle=bar.theta,
                obb_ann=tuple((p.x, p.y) for p in obb_corners(bar)),
            )
        )
        bumps.append((bar, weights))

        if axis_is_y:
            dy = noise * aabb.height * axis_sign
            shifted = AxisAlignedBox(aabb.x_min, aabb.y_min + dy, aabb.x_max, aabb.y_max + dy)
        else:
            dx = noise * aabb.width * axis_sign
            shifted = AxisAlignedBox(aabb.x_min + dx, aabb.y_min, aabb.x_max + dx, aabb.y_max)
        c = math.cos(math.radians(bar.theta))
        s = math.sin(math.radians(bar.theta))
        slide = noise * 2.0 * bar.half_len * long_sign
        shifted_obb = OrientedBox(
            bar.cx + slide * c, bar.cy + slide * s, bar.half_len, bar.half_wid, bar.theta
        )
        score = 1.0 - noise * score_u
        detections.append(Detection(cls=cls, score=score, box=shifted))
        detections.append(Detection(cls=cls, score=score, box=shifted_obb))
        if dup_u < noise:
            # Duplicates score below 1 - 0.4 * noise, the primary floor, so
            # they rank under every primary detection at any noise level.
            dup_score = 1.0 - noise * (0.4 + dup_gap)
            detections.append(Detection(cls=cls, score=dup_score, box=shifted))
            detections.append(Detection(cls=cls, score=dup_score, box=shifted_obb))

    ys, xs = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64), indexing="ij")
    values = np.empty((size, size, channels), dtype=np.float64)
    for ch, (fx, fy, phase) in enumerate(waves):
        values[:, :, ch] = 0.4 + 0.2 * np.sin(
            2.0 * math.pi * (fx * xs + fy * ys) / size + phase
        )
    for bar, weights in bumps:
        c = math.cos(math.radians(bar.theta))
        s = math.sin(math.radians(bar.theta))
        along = (xs - bar.cx) * c + (ys - bar.cy) * s
        across = -(xs - bar.cx) * s + (ys - bar.cy) * c
        bump = np.exp(
            -np.square(along / (0.8 * bar.half_len)) - np.square(across / (0.8 * bar.half_wid))
        )
        values += bump[:, :, None] * weights[None, None, :]

    annotation = SceneAnnotation(
        image_id=f"synth-{seed}", width=size, height=size, instances=tuple(instances)
    )
    return SyntheticScene(
        features=FeatureGrid.from_array(values),
        annotations=annotation,
        oracle_detections=tuple(detections),
    )
