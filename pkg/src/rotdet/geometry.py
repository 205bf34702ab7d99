"""Axis-aligned and rotated box primitives.

Angles are degrees in [0, 180). An oriented box stores half extents along its
longitudinal axis u(theta) = (cos t, sin t) and lateral axis v(theta) =
(-sin t, cos t); theta = 0 points along +x and angles grow toward +y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class Point2(NamedTuple):
    x: float
    y: float


def normalize_angle(theta: float) -> float:
    """Map any finite angle in degrees onto [0, 180).

    A box is symmetric under 180-degree rotation, so orientation lives on a
    half circle.
    """
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    wrapped = theta % 180.0
    # CPython float % can round up to the modulus itself for tiny negatives
    # ((-1e-15) % 180.0 == 180.0); keep the range half-open.
    if wrapped >= 180.0:
        wrapped = 0.0
    return wrapped


def _unit_axes(theta: float) -> tuple[float, float]:
    """Return (cos, sin) of a degree angle, exact at 0 and 90."""
    if theta == 0.0:
        return 1.0, 0.0
    if theta == 90.0:
        return 0.0, 1.0
    rad = math.radians(theta)
    return math.cos(rad), math.sin(rad)


@dataclass(frozen=True, slots=True)
class AxisAlignedBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"box coordinates must be finite, got {vals}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must have positive extent, got {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> Point2:
        return Point2((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True, slots=True)
class OrientedBox:
    """Rotated rectangle: center, half extents, angle in [0, 180) degrees.

    half_len runs along the longitudinal axis u(theta), half_wid along the
    lateral axis v(theta).
    """

    cx: float
    cy: float
    half_len: float
    half_wid: float
    theta: float

    def __post_init__(self) -> None:
        vals = (self.cx, self.cy, self.half_len, self.half_wid, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"oriented box fields must be finite, got {vals}")
        if self.half_len <= 0.0 or self.half_wid <= 0.0:
            raise ValueError(
                f"half extents must be positive, got ({self.half_len}, {self.half_wid})"
            )
        if not 0.0 <= self.theta < 180.0:
            raise ValueError(f"theta must lie in [0, 180), got {self.theta}")

    @property
    def center(self) -> Point2:
        return Point2(self.cx, self.cy)

    @property
    def area(self) -> float:
        return 4.0 * self.half_len * self.half_wid


def rotate_aabb(box: AxisAlignedBox, theta: float) -> OrientedBox:
    """Rotate an axis-aligned box about its center by theta degrees."""
    cx, cy = box.center
    return OrientedBox(
        cx=cx,
        cy=cy,
        half_len=box.width / 2.0,
        half_wid=box.height / 2.0,
        theta=normalize_angle(theta),
    )


def obb_corners(box: OrientedBox) -> tuple[Point2, Point2, Point2, Point2]:
    """Corners in cyclic order, positively wound in math axes.

    Corners 0 and 3 share the low-longitudinal end edge, corners 1 and 2 the
    high end; parsers of serialized corner lists rely on this order.
    """
    c, s = _unit_axes(box.theta)
    ux, uy = c * box.half_len, s * box.half_len
    vx, vy = -s * box.half_wid, c * box.half_wid
    return (
        Point2(box.cx - ux - vx, box.cy - uy - vy),
        Point2(box.cx + ux - vx, box.cy + uy - vy),
        Point2(box.cx + ux + vx, box.cy + uy + vy),
        Point2(box.cx - ux + vx, box.cy - uy + vy),
    )


def obb_from_corners(corners) -> OrientedBox:
    """Rebuild an oriented box from four corners in obb_corners order.

    The quadrilateral must be a rectangle within a 1e-6 relative tolerance;
    anything else (wrong order, shear, degenerate edges) is rejected.
    """
    pts = [(float(x), float(y)) for x, y in corners]
    if len(pts) != 4 or not all(math.isfinite(v) for p in pts for v in p):
        raise ValueError(f"expected 4 finite corner points, got {corners!r}")
    (x0, y0), (x1, y1), (x2, y2), (x3, y3) = pts
    ux, uy = (x1 - x0) / 2.0, (y1 - y0) / 2.0
    vx, vy = (x3 - x0) / 2.0, (y3 - y0) / 2.0
    scale = max(1.0, *(abs(v) for p in pts for v in p))
    if abs(x0 + x2 - x1 - x3) > 1e-6 * scale or abs(y0 + y2 - y1 - y3) > 1e-6 * scale:
        raise ValueError("corner points do not form a parallelogram")
    if abs(ux * vx + uy * vy) > 1e-6 * scale * scale:
        raise ValueError("corner edges are not perpendicular")
    half_len = math.hypot(ux, uy)
    half_wid = math.hypot(vx, vy)
    if half_len <= 0.0 or half_wid <= 0.0:
        raise ValueError("corner points describe a degenerate rectangle")
    theta = normalize_angle(math.degrees(math.atan2(uy, ux)))
    return OrientedBox(x0 + ux + vx, y0 + uy + vy, half_len, half_wid, theta)


def enclosing_aabb(box: OrientedBox) -> AxisAlignedBox:
    """Tightest axis-aligned box containing the rotated rectangle."""
    c, s = _unit_axes(box.theta)
    ex = abs(c) * box.half_len + abs(s) * box.half_wid
    ey = abs(s) * box.half_len + abs(c) * box.half_wid
    return AxisAlignedBox(box.cx - ex, box.cy - ey, box.cx + ex, box.cy + ey)


def iou_aabb(a: AxisAlignedBox, b: AxisAlignedBox) -> float:
    """Intersection-over-union of two axis-aligned boxes."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    if iw <= 0.0:
        return 0.0
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


# Intersection areas below this are numerical slivers, treated as empty.
_SLIVER_AREA = 1e-12


def _clip_polygon(
    subject: list[tuple[float, float]], clipper: list[tuple[float, float]]
) -> list[tuple[float, float]]:
    """Convex polygon clipped by a convex positively-wound polygon.

    Sutherland-Hodgman with an inclusive inside test, so clipping a polygon
    against itself keeps every vertex.
    """
    output = subject
    cx1, cy1 = clipper[-1]
    for cx2, cy2 in clipper:
        if not output:
            return output
        ex, ey = cx2 - cx1, cy2 - cy1
        inputs = output
        output = []
        sx, sy = inputs[-1]
        s_in = ex * (sy - cy1) - ey * (sx - cx1) >= 0.0
        for px, py in inputs:
            p_in = ex * (py - cy1) - ey * (px - cx1) >= 0.0
            if p_in != s_in:
                dx, dy = px - sx, py - sy
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ex * (cy1 - sy) - ey * (cx1 - sx)) / denom
                    output.append((sx + t * dx, sy + t * dy))
            if p_in:
                output.append((px, py))
            sx, sy, s_in = px, py, p_in
        cx1, cy1 = cx2, cy2
    return output


def _polygon_area(points: list[tuple[float, float]]) -> float:
    """Shoelace area, accumulated relative to the first vertex.

    Working in vertex-relative coordinates keeps the cancellation error tied
    to the polygon's own scale instead of its distance from the origin.
    """
    if len(points) < 3:
        return 0.0
    x_ref, y_ref = points[0]
    area2 = 0.0
    x0, y0 = points[-1][0] - x_ref, points[-1][1] - y_ref
    for px, py in points:
        x1, y1 = px - x_ref, py - y_ref
        area2 += x0 * y1 - x1 * y0
        x0, y0 = x1, y1
    return abs(area2) / 2.0


def _corner_list(box: OrientedBox) -> list[tuple[float, float]]:
    c, s = _unit_axes(box.theta)
    ux, uy = c * box.half_len, s * box.half_len
    vx, vy = -s * box.half_wid, c * box.half_wid
    cx, cy = box.cx, box.cy
    return [
        (cx - ux - vx, cy - uy - vy),
        (cx + ux - vx, cy + uy - vy),
        (cx + ux + vx, cy + uy + vy),
        (cx - ux + vx, cy - uy + vy),
    ]


def iou_obb(a: OrientedBox, b: OrientedBox) -> float:
    """Intersection-over-union of two rotated rectangles via polygon clipping.

    All three areas come from the same shoelace evaluation over corner
    polygons, so identical boxes score exactly 1.0.
    """
    ca, cb = _corner_list(a), _corner_list(b)
    inter = _polygon_area(_clip_polygon(ca, cb))
    if inter < _SLIVER_AREA:
        return 0.0
    union = _polygon_area(ca) + _polygon_area(cb) - inter
    if inter >= union:
        return 1.0
    return inter / union
