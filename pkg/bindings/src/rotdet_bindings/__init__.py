"""Buffer-protocol surface over the rotdet geometry and pooling kernels.

The boundary contract mirrors a C ABI. Every input is an object exporting
the buffer protocol with 32-bit float elements (numpy arrays, memoryviews,
shared-memory views, ...); shapes carry the batch layout and results come
back as float32 arrays, which export the buffer protocol themselves. Box
rows hold (center_x, center_y, length, width, theta_deg) with full extents;
the boundary halves them and wraps theta into [0, 180) before calling the
core, both exact operations, so each returned element is the core result
rounded once to float32.

Failures of any kind (foreign dtype, wrong rank or row arity, degenerate
rows, non-contiguous feature grids) raise BindingError and never abort the
host process. Functions are reentrant: nothing is shared between calls, so
hosts may call from multiple threads as long as a buffer is not mutated
while a call reads it.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from rotdet import (
    AxisAlignedBox,
    FeatureGrid,
    OrientedBox,
    iou_obb,
    make_orp,
    normalize_angle,
    oaroi_pool,
    obb_corners,
)

__all__ = [
    "ABI_VERSION",
    "BindingError",
    "BufferView",
    "bind_iou_obb",
    "bind_make_orp",
    "bind_oaroi_pool",
]

ABI_VERSION = "rotdet-bindings/1"
__version__ = "0.1.0"

_FLOAT32_FORMATS = ("f", "<f", "=f")


class BindingError(Exception):
    """Recoverable boundary failure: bad buffer, shape, or row content."""


@dataclass(frozen=True)
class BufferView:
    """Pointer-free descriptor of one float32 buffer crossing the boundary."""

    shape: tuple[int, ...]
    strides: tuple[int, ...]  # in elements, not bytes
    c_contiguous: bool
    data: np.ndarray = field(repr=False)


def _view(obj, rank: int, what: str) -> BufferView:
    try:
        mv = memoryview(obj)
    except TypeError:
        raise BindingError(f"{what} does not export the buffer protocol") from None
    if mv.format not in _FLOAT32_FORMATS:
        raise BindingError(f"{what} must hold 32-bit floats, got format {mv.format!r}")
    if mv.ndim != rank:
        raise BindingError(f"{what} must have rank {rank}, got shape {tuple(mv.shape)}")
    return BufferView(
        shape=tuple(mv.shape),
        strides=tuple(s // mv.itemsize for s in mv.strides),
        c_contiguous=mv.c_contiguous,
        data=np.asarray(mv),
    )


def _require_row_arity(view: BufferView, arity: int, what: str, layout: str) -> None:
    if view.shape[1] != arity:
        raise BindingError(f"{what} rows must be {layout}, got shape {view.shape}")


def _finite_row(values, what: str, index: int) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if not all(math.isfinite(v) for v in out):
        raise BindingError(f"{what} row {index}: fields must be finite, got {out}")
    return out


def _obb_from_row(row, what: str, index: int) -> OrientedBox:
    cx, cy, length, width, theta = _finite_row(row, what, index)
    try:
        return OrientedBox(cx, cy, length / 2.0, width / 2.0, normalize_angle(theta))
    except ValueError as exc:
        raise BindingError(f"{what} row {index}: {exc}") from None


def bind_iou_obb(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise rotated IoU of two box batches, as an N x M float32 array."""
    a = _view(boxes_a, 2, "boxes_a")
    b = _view(boxes_b, 2, "boxes_b")
    _require_row_arity(a, 5, "boxes_a", "(cx, cy, length, width, theta_deg)")
    _require_row_arity(b, 5, "boxes_b", "(cx, cy, length, width, theta_deg)")
    first = [_obb_from_row(a.data[i], "boxes_a", i) for i in range(a.shape[0])]
    second = [_obb_from_row(b.data[j], "boxes_b", j) for j in range(b.shape[0])]
    out = np.empty((len(first), len(second)), dtype=np.float32)
    for i, box_i in enumerate(first):
        for j, box_j in enumerate(second):
            out[i, j] = iou_obb(box_i, box_j)
    return out


def bind_make_orp(boxes, thetas) -> np.ndarray:
    """Oriented proposal corners for N regions, as an N x 8 float32 array.

    Each output row is (x0, y0, x1, y1, x2, y2, x3, y3) in cyclic order
    starting at the corner lying at (-length/2, -width/2) in the proposal
    frame; at theta 0 that is (x_min, y_min), (x_max, y_min), (x_max, y_max),
    (x_min, y_max) of the input region.
    """
    b = _view(boxes, 2, "boxes")
    t = _view(thetas, 1, "thetas")
    _require_row_arity(b, 4, "boxes", "(x_min, y_min, x_max, y_max)")
    if t.shape[0] != b.shape[0]:
        raise BindingError(
            f"thetas must hold one angle per box, got {t.shape[0]} for {b.shape[0]} boxes"
        )
    out = np.empty((b.shape[0], 8), dtype=np.float32)
    for i in range(b.shape[0]):
        x_min, y_min, x_max, y_max = _finite_row(b.data[i], "boxes", i)
        (theta,) = _finite_row((t.data[i],), "thetas", i)
        try:
            region = AxisAlignedBox(x_min, y_min, x_max, y_max)
            corners = obb_corners(make_orp(region, theta).orp)
        except ValueError as exc:
            raise BindingError(f"boxes row {i}: {exc}") from None
        out[i] = [coord for p in corners for coord in (p.x, p.y)]
    return out


def bind_oaroi_pool(features, orps, gh: int, gw: int) -> np.ndarray:
    """Pool N oriented windows over one feature grid, N x gh x gw x C float32.

    The feature buffer must be row-major contiguous (height, width,
    channels); box rows follow the bind_iou_obb layout.
    """
    f = _view(features, 3, "features")
    if not f.c_contiguous:
        raise BindingError("features must be row-major contiguous")
    o = _view(orps, 2, "orps")
    _require_row_arity(o, 5, "orps", "(cx, cy, length, width, theta_deg)")
    try:
        gh = int(gh)
        gw = int(gw)
    except (TypeError, ValueError):
        raise BindingError(f"grid shape must be integral, got ({gh!r}, {gw!r})") from None
    if gh < 1 or gw < 1:
        raise BindingError(f"grid shape must be positive, got ({gh}, {gw})")
    grid = FeatureGrid.from_array(f.data)
    out = np.empty((o.shape[0], gh, gw, grid.channels), dtype=np.float32)
    for i in range(o.shape[0]):
        box = _obb_from_row(o.data[i], "orps", i)
        try:
            out[i] = oaroi_pool(grid, box, gh, gw).values
        except ValueError as exc:
            raise BindingError(f"orps row {i}: {exc}") from None
    return out
