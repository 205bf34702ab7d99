"""Oriented proposal generation and the inverse corner transform.

An oriented proposal is built from an axis-aligned region plus an angle: the
largest theta-oriented rectangle inscribed in the region gives the lateral
extent, then the rectangle is stretched longitudinally until its end edges
reach the region's extreme corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import (
    AxisAlignedBox,
    OrientedBox,
    Point2,
    _unit_axes,
    normalize_angle,
)

# Angles this close to an axis (degrees) collapse to the exact axis case.
_AXIS_SNAP_DEG = 1e-6


@dataclass(frozen=True, slots=True)
class OrientedProposal:
    orp: OrientedBox
    source_rp2: AxisAlignedBox
    theta: float

    def __post_init__(self) -> None:
        if self.orp.theta != self.theta:
            raise ValueError("proposal angle must match its oriented box")
        if self.orp.center != self.source_rp2.center:
            raise ValueError("proposal must stay centered on its source region")


def _snap_axis(theta: float) -> float | None:
    """Return 0.0 or 90.0 for near-axis angles, else None."""
    if theta <= _AXIS_SNAP_DEG or theta >= 180.0 - _AXIS_SNAP_DEG:
        return 0.0
    if abs(theta - 90.0) <= _AXIS_SNAP_DEG:
        return 90.0
    return None


def max_inscribed_rect(box: AxisAlignedBox, theta: float) -> OrientedBox:
    """Largest theta-oriented rectangle contained in an axis-aligned box.

    With half extents (p, q) along the rotated axes, containment of the
    centered rectangle reduces to two linear constraints

        c*p + s*q <= W/2,   s*p + c*q <= H/2      (c=|cos|, s=|sin|)

    and maximizing p*q over that region attains its optimum either where both
    constraints are active or at the single-constraint vertex (A/2c, A/2s).
    The optimum is centered because the constraints are symmetric in sign.
    """
    theta_n = normalize_angle(theta)
    cx, cy = box.center
    axis = _snap_axis(theta_n)
    if axis == 0.0:
        return OrientedBox(cx, cy, box.width / 2.0, box.height / 2.0, 0.0)
    if axis == 90.0:
        return OrientedBox(cx, cy, box.height / 2.0, box.width / 2.0, 90.0)

    cos_t, sin_t = _unit_axes(theta_n)
    c, s = abs(cos_t), abs(sin_t)
    a_lim, b_lim = box.width / 2.0, box.height / 2.0

    candidates: list[tuple[float, float]] = []
    denom = (c - s) * (c + s)
    if denom != 0.0:
        p = (c * a_lim - s * b_lim) / denom
        q = (c * b_lim - s * a_lim) / denom
        if p > 0.0 and q > 0.0:
            candidates.append((p, q))
    # Vertex of one active constraint, feasibility checked against the other
    # with a hair of slack so the true optimum is not lost to rounding.
    p, q = a_lim / (2.0 * c), a_lim / (2.0 * s)
    if s * p + c * q <= b_lim * (1.0 + 1e-12):
        candidates.append((p, q))
    p, q = b_lim / (2.0 * s), b_lim / (2.0 * c)
    if c * p + s * q <= a_lim * (1.0 + 1e-12):
        candidates.append((p, q))

    if not candidates:  # unreachable for valid boxes; guards rounding corner cases
        raise ValueError(f"no inscribed rectangle found for {box} at theta={theta_n}")
    best_p, best_q = max(candidates, key=lambda pq: pq[0] * pq[1])
    return OrientedBox(cx, cy, best_p, best_q, theta_n)


def make_orp(rp2: AxisAlignedBox, theta: float) -> OrientedProposal:
    """Build an oriented proposal over an axis-aligned region.

    The lateral half extent comes from the inscribed rectangle; the
    longitudinal half extent is the half projection of the region onto the
    proposal axis, (W|cos| + H|sin|)/2, so each end edge's line passes through
    an extreme corner of the region. At 0 and 90 degrees the proposal
    footprint is the region itself.
    """
    inscribed = max_inscribed_rect(rp2, theta)
    cos_t, sin_t = _unit_axes(inscribed.theta)
    half_len = (rp2.width * abs(cos_t) + rp2.height * abs(sin_t)) / 2.0
    orp = OrientedBox(inscribed.cx, inscribed.cy, half_len, inscribed.half_wid, inscribed.theta)
    return OrientedProposal(orp=orp, source_rp2=rp2, theta=inscribed.theta)


def inverse_transform(
    theta: float, rp2: AxisAlignedBox, local_box: AxisAlignedBox
) -> tuple[Point2, Point2, Point2, Point2]:
    """Map a rotated-frame box to image-frame corners.

    Builds the homogeneous transform that rotates by theta about the region
    center C and applies it to the four corners of local_box, returned in
    row-major order (min,min), (max,min), (min,max), (max,max). At theta=0
    the transform is the identity.
    """
    theta_n = normalize_angle(theta)
    c, s = _unit_axes(theta_n)
    ccx, ccy = rp2.center
    # Rotation about C: p -> C + R (p - C), written as an affine row pair.
    tx = ccx - c * ccx + s * ccy
    ty = ccy - s * ccx - c * ccy
    corners = (
        (local_box.x_min, local_box.y_min),
        (local_box.x_max, local_box.y_min),
        (local_box.x_min, local_box.y_max),
        (local_box.x_max, local_box.y_max),
    )
    return tuple(
        Point2(c * x - s * y + tx, s * x + c * y + ty) for x, y in corners
    )  # type: ignore[return-value]
