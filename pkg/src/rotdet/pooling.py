"""Fixed-size max pooling from axis-aligned and oriented windows.

A feature grid is a dense (height, width, channels) scalar field sampled at
integer cell coordinates; fractional reads are bilinear with clamp-to-edge
borders. Pooling divides a window into gh x gw cells and takes, per cell, the
max of a 2x2 layout of bilinear samples. Output rows advance along the
window's longitudinal axis (x for an axis-aligned window), columns along the
lateral axis, so a pooled patch is expressed in the window's own frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import AxisAlignedBox, OrientedBox, _unit_axes, enclosing_aabb, rotate_aabb

# Fractions of a pooling cell where the 2x2 bilinear samples sit.
_CELL_FRACTIONS = np.array([0.25, 0.75])


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    height: int
    width: int
    channels: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if min(self.height, self.width, self.channels) < 1:
            raise ValueError("feature grid dimensions must be at least 1")
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"values shape {arr.shape} does not match "
                f"({self.height}, {self.width}, {self.channels})"
            )
        if not np.isfinite(arr).all():
            raise ValueError("feature grid values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "FeatureGrid":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected a (height, width, channels) array, got shape {arr.shape}")
        return cls(height=arr.shape[0], width=arr.shape[1], channels=arr.shape[2], values=arr)


@dataclass(frozen=True, eq=False)
class PooledPatch:
    gh: int
    gw: int
    channels: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.values.shape != (self.gh, self.gw, self.channels):
            raise ValueError(
                f"patch shape {self.values.shape} does not match ({self.gh}, {self.gw}, {self.channels})"
            )


def bilinear_sample(fm: FeatureGrid, x: float, y: float, c: int) -> float:
    """Bilinear read of channel c at continuous cell coords, clamped at edges."""
    if not 0 <= c < fm.channels:
        raise ValueError(f"channel {c} out of range for {fm.channels}-channel grid")
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValueError(f"sample coordinates must be finite, got ({x}, {y})")
    xc = min(max(float(x), 0.0), fm.width - 1.0)
    yc = min(max(float(y), 0.0), fm.height - 1.0)
    # Coordinates at the far border read that cell directly (fraction 0), so
    # integer coordinates always return stored values exactly.
    x0 = int(xc)
    if x0 >= fm.width - 1:
        x0 = x1 = fm.width - 1
        fx = 0.0
    else:
        x1 = x0 + 1
        fx = xc - x0
    y0 = int(yc)
    if y0 >= fm.height - 1:
        y0 = y1 = fm.height - 1
        fy = 0.0
    else:
        y1 = y0 + 1
        fy = yc - y0
    v = fm.values
    # lerp form: exact on constant and affine fields
    top = v[y0, x0, c] + fx * (v[y0, x1, c] - v[y0, x0, c])
    bot = v[y1, x0, c] + fx * (v[y1, x1, c] - v[y1, x0, c])
    return float(top + fy * (bot - top))


def _require_overlap(fm: FeatureGrid, extent: AxisAlignedBox, what: str) -> None:
    # The sampled domain is [0, W-1] x [0, H-1] in cell coordinates.
    if (
        extent.x_max < 0.0
        or extent.x_min > fm.width - 1.0
        or extent.y_max < 0.0
        or extent.y_min > fm.height - 1.0
    ):
        raise ValueError(f"{what} lies fully outside the feature grid")


def _pool_oriented(fm: FeatureGrid, box: OrientedBox, gh: int, gw: int) -> PooledPatch:
    cos_t, sin_t = _unit_axes(box.theta)
    step_l = 2.0 * box.half_len / gh
    step_w = 2.0 * box.half_wid / gw
    # Longitudinal/lateral sample offsets from the box center: (gh, 2), (gw, 2).
    along = -box.half_len + (np.arange(gh)[:, None] + _CELL_FRACTIONS[None, :]) * step_l
    across = -box.half_wid + (np.arange(gw)[:, None] + _CELL_FRACTIONS[None, :]) * step_w

    a = along[:, :, None, None]
    b = across[None, None, :, :]
    xs = box.cx + a * cos_t + b * (-sin_t)
    ys = box.cy + a * sin_t + b * cos_t

    h, w = fm.height, fm.width
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    # Mirror the scalar border rule: far-edge samples read the border cell
    # directly with fraction 0.
    x0 = np.floor(xs).astype(np.int64)
    x_edge = x0 >= w - 1
    x0 = np.where(x_edge, w - 1, x0)
    x1 = np.minimum(x0 + 1, w - 1)
    fx = np.where(x_edge, 0.0, xs - x0)[..., None]
    y0 = np.floor(ys).astype(np.int64)
    y_edge = y0 >= h - 1
    y0 = np.where(y_edge, h - 1, y0)
    y1 = np.minimum(y0 + 1, h - 1)
    fy = np.where(y_edge, 0.0, ys - y0)[..., None]

    v = fm.values
    # same lerp form as bilinear_sample, term for term
    top = v[y0, x0] + fx * (v[y0, x1] - v[y0, x0])
    bot = v[y1, x0] + fx * (v[y1, x1] - v[y1, x0])
    interp = top + fy * (bot - top)
    # (gh, 2, gw, 2, C): reduce the per-cell 2x2 sample layout.
    pooled = interp.max(axis=(1, 3))
    return PooledPatch(gh=gh, gw=gw, channels=fm.channels, values=pooled)


def oaroi_pool(fm: FeatureGrid, orp: OrientedBox, gh: int, gw: int) -> PooledPatch:
    """Max pool an oriented window into a gh x gw patch in the window frame.

    Rows follow the longitudinal axis, so patches from windows aligned with an
    object's orientation are canonical regardless of that orientation.
    Samples beyond the grid clamp to border values; only a window with no
    overlap at all is an error.
    """
    if gh < 1 or gw < 1:
        raise ValueError(f"output grid must be at least 1x1, got {gh}x{gw}")
    _require_overlap(fm, enclosing_aabb(orp), "oriented window")
    return _pool_oriented(fm, orp, gh, gw)


def roi_pool(fm: FeatureGrid, box: AxisAlignedBox, gh: int, gw: int) -> PooledPatch:
    """Max pool an axis-aligned window; equals oaroi_pool at theta=0."""
    if gh < 1 or gw < 1:
        raise ValueError(f"output grid must be at least 1x1, got {gh}x{gw}")
    oriented = rotate_aabb(box, 0.0)
    _require_overlap(fm, enclosing_aabb(oriented), "window")
    return _pool_oriented(fm, oriented, gh, gw)
