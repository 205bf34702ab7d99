"""Ground-truth assignment, the box-delta codec, and detector losses.

Stage 1 supervises class, axis-aligned box deltas, orientation bin, and the
in-bin orientation offset; orientation and box terms are gated off for
background proposals. Stage 2 supervises class plus box deltas, the latter
gated to proposals whose orientation is axis-aligned, where the region frame
and the image frame coincide.

Losses consume probabilities (not logits) and are reported as negative
log-likelihoods and smooth-l1 sums, averaged over the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .geometry import AxisAlignedBox, normalize_angle
from .orientation import AngleBinning, OrientationLabel, encode_orientation

if TYPE_CHECKING:  # structural use only; the class lives with the evaluator
    from .eval import GroundTruthInstance


class ClassLabel(IntEnum):
    BACKGROUND = 0
    GUN = 1
    RIFLE = 2


N_CLASSES = len(ClassLabel)
FOREGROUND_CLASSES = (ClassLabel.GUN, ClassLabel.RIFLE)

# Proposal orientations this close to 0 or 90 degrees count as axis-aligned.
_AXIS_TOL_DEG = 1e-6

# Assignment thresholds on max IoU against ground truth.
FG_IOU_THRESH = 0.5
BG_IOU_THRESH = 0.1


def axis_aligned_indicator(theta: float) -> int:
    """1 if the angle is 0 or 90 degrees within tolerance, else 0."""
    t = normalize_angle(theta)
    if t <= _AXIS_TOL_DEG or t >= 180.0 - _AXIS_TOL_DEG or abs(t - 90.0) <= _AXIS_TOL_DEG:
        return 1
    return 0


def _check_deltas(deltas: Sequence[float]) -> tuple[float, float, float, float]:
    vals = tuple(float(v) for v in deltas)
    if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
        raise ValueError(f"expected 4 finite delta values, got {deltas!r}")
    return vals


@dataclass(frozen=True)
class Stage1Target:
    """Supervision for one stage-1 proposal.

    Background proposals carry no regression targets; their deltas/orient
    fields are None and never read (delta_ind gates them out of every loss).
    """

    cls: ClassLabel
    deltas: tuple[float, float, float, float] | None
    orient: OrientationLabel | None
    delta_ind: int

    def __post_init__(self) -> None:
        if self.delta_ind not in (0, 1):
            raise ValueError(f"delta_ind must be 0 or 1, got {self.delta_ind}")
        if (self.delta_ind == 0) != (self.cls == ClassLabel.BACKGROUND):
            raise ValueError("delta_ind must be 0 exactly for background targets")
        if self.delta_ind == 1:
            if self.deltas is None or self.orient is None:
                raise ValueError("foreground targets need deltas and orientation")
            _check_deltas(self.deltas)

    @classmethod
    def background(cls) -> "Stage1Target":
        return cls(cls=ClassLabel.BACKGROUND, deltas=None, orient=None, delta_ind=0)

    @classmethod
    def foreground(
        cls, label: ClassLabel, deltas: Sequence[float], orient: OrientationLabel
    ) -> "Stage1Target":
        if label == ClassLabel.BACKGROUND:
            raise ValueError("foreground target cannot carry the background label")
        return cls(cls=label, deltas=_check_deltas(deltas), orient=orient, delta_ind=1)


@dataclass(frozen=True)
class Stage1Prediction:
    """Raw stage-1 head outputs for one proposal (probabilities, not logits)."""

    cls_probs: tuple[float, ...]
    deltas: tuple[float, float, float, float]
    orient_probs: tuple[float, ...]
    orient_offsets: tuple[float, ...]

    def __post_init__(self) -> None:
        _check_probs(self.cls_probs, N_CLASSES, "cls_probs")
        _check_deltas(self.deltas)
        _check_probs(self.orient_probs, len(self.orient_probs), "orient_probs")
        if len(self.orient_offsets) != len(self.orient_probs):
            raise ValueError("need one orientation offset per orientation bin")
        if not all(math.isfinite(v) for v in self.orient_offsets):
            raise ValueError("orientation offsets must be finite")


@dataclass(frozen=True)
class Stage2Target:
    cls: ClassLabel
    deltas: tuple[float, float, float, float] | None
    theta_ind: int

    def __post_init__(self) -> None:
        if self.theta_ind not in (0, 1):
            raise ValueError(f"theta_ind must be 0 or 1, got {self.theta_ind}")
        if self.theta_ind == 1:
            if self.deltas is None:
                raise ValueError("axis-aligned targets need box deltas")
            _check_deltas(self.deltas)

    @classmethod
    def for_proposal(
        cls, label: ClassLabel, deltas: Sequence[float] | None, proposal_theta: float
    ) -> "Stage2Target":
        """Gate box supervision to axis-aligned foreground proposals."""
        if label == ClassLabel.BACKGROUND or deltas is None:
            return cls(cls=label, deltas=None, theta_ind=0)
        ind = axis_aligned_indicator(proposal_theta)
        return cls(cls=label, deltas=_check_deltas(deltas) if ind else None, theta_ind=ind)


@dataclass(frozen=True)
class Stage2Prediction:
    cls_probs: tuple[float, ...]
    deltas: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        _check_probs(self.cls_probs, N_CLASSES, "cls_probs")
        _check_deltas(self.deltas)


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 0.1
    gamma: float = 1.0
    eta: float = 1.0

    def __post_init__(self) -> None:
        vals = (self.alpha, self.beta, self.gamma, self.eta)
        if not all(math.isfinite(v) and v >= 0.0 for v in vals):
            raise ValueError(f"loss weights must be finite and non-negative, got {vals}")


def _check_probs(probs: Sequence[float], expected_len: int, name: str) -> None:
    if len(probs) != expected_len:
        raise ValueError(f"{name} must have length {expected_len}, got {len(probs)}")
    if not all(math.isfinite(p) and p >= 0.0 for p in probs):
        raise ValueError(f"{name} must be non-negative and finite")
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"{name} must sum to 1 within 1e-6, got {total}")


# ---------------------------------------------------------------------------
# Assignment and the box-delta codec
# ---------------------------------------------------------------------------


def encode_box_deltas(
    anchor: AxisAlignedBox, gt: AxisAlignedBox
) -> tuple[float, float, float, float]:
    """Center offsets normalized by anchor size plus log size ratios."""
    ax, ay = anchor.center
    gx, gy = gt.center
    return (
        (gx - ax) / anchor.width,
        (gy - ay) / anchor.height,
        math.log(gt.width / anchor.width),
        math.log(gt.height / anchor.height),
    )


def apply_box_deltas(anchor: AxisAlignedBox, deltas: Sequence[float]) -> AxisAlignedBox:
    """Invert encode_box_deltas; errors if the exponentials leave float range."""
    dx, dy, dw, dh = _check_deltas(deltas)
    ax, ay = anchor.center
    cx = ax + dx * anchor.width
    cy = ay + dy * anchor.height
    try:
        w = anchor.width * math.exp(dw)
        h = anchor.height * math.exp(dh)
    except OverflowError:
        raise ValueError(f"deltas {deltas!r} map anchor outside the representable range") from None
    if not all(math.isfinite(v) for v in (cx, cy, w, h)) or w <= 0.0 or h <= 0.0:
        raise ValueError(f"deltas {deltas!r} map anchor outside the representable range")
    return AxisAlignedBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)


def assign_stage1_targets(
    proposals: Sequence[AxisAlignedBox],
    gts: Sequence["GroundTruthInstance"],
    binning: AngleBinning,
) -> list[tuple[AxisAlignedBox, Stage1Target | None]]:
    """Label proposals against ground truth by max IoU.

    Max IoU >= 0.5 makes a foreground target from the best-overlapping
    instance; [0.1, 0.5) makes a background target; anything lower is
    rejected (None), including every proposal when there is no ground truth.
    """
    from .geometry import iou_aabb

    out: list[tuple[AxisAlignedBox, Stage1Target | None]] = []
    for prop in proposals:
        best_iou, best_gt = 0.0, None
        for gt in gts:
            v = iou_aabb(prop, gt.aabb)
            if v > best_iou:
                best_iou, best_gt = v, gt
        if best_gt is not None and best_iou >= FG_IOU_THRESH:
            target = Stage1Target.foreground(
                best_gt.cls,
                encode_box_deltas(prop, best_gt.aabb),
                encode_orientation(best_gt.angle, binning),
            )
            out.append((prop, target))
        elif best_iou >= BG_IOU_THRESH:
            out.append((prop, Stage1Target.background()))
        else:
            out.append((prop, None))
    return out


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def smooth_l1(x):
    """0.5 x^2 inside |x| < 1, |x| - 0.5 outside; elementwise on arrays."""
    ax = np.abs(x)
    out = np.where(ax < 1.0, 0.5 * np.square(x), ax - 0.5)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def smooth_l1_grad(x):
    """Derivative of smooth_l1: x inside the quadratic region, +-1 outside."""
    out = np.where(np.abs(x) < 1.0, np.asarray(x, dtype=np.float64), np.sign(x))
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def _mean(values: np.ndarray) -> float:
    # Batch reduction lives here so the sum-vs-mean convention has one home.
    return float(values.sum() / values.shape[0])


@dataclass(frozen=True)
class Stage1Loss:
    total: float
    cls_term: float
    orient_term: float
    box_term: float
    offset_term: float


@dataclass(frozen=True)
class Stage2Loss:
    total: float
    cls_term: float
    box_term: float


@dataclass(frozen=True)
class _Stage1TargetArrays:
    labels: np.ndarray
    fg: np.ndarray
    deltas: np.ndarray
    bins: np.ndarray
    offsets: np.ndarray


def _stack_stage1_targets(targets: Sequence[Stage1Target]) -> _Stage1TargetArrays:
    n = len(targets)
    labels = np.zeros(n, dtype=np.int64)
    fg = np.zeros(n, dtype=bool)
    deltas = np.zeros((n, 4))
    bins = np.zeros(n, dtype=np.int64)
    offsets = np.zeros(n)
    for i, t in enumerate(targets):
        labels[i] = int(t.cls)
        if t.delta_ind:
            fg[i] = True
            deltas[i] = t.deltas
            bins[i] = t.orient.bin_index
            offsets[i] = t.orient.offset
    return _Stage1TargetArrays(labels, fg, deltas, bins, offsets)


def stage1_objective(
    cls_probs: np.ndarray,
    deltas: np.ndarray,
    orient_probs: np.ndarray,
    orient_offsets: np.ndarray,
    targets: Sequence[Stage1Target],
    weights: LossWeights = LossWeights(),
) -> Stage1Loss:
    """Stage-1 loss on raw prediction arrays.

    Performs no probability validation, so finite-difference probes may
    evaluate it at slightly off-simplex points. Background rows of the
    regression/orientation inputs are never read.
    """
    t = _stack_stage1_targets(targets)
    n = t.labels.shape[0]
    if cls_probs.shape != (n, N_CLASSES):
        raise ValueError(f"cls_probs shape {cls_probs.shape} does not match batch {n}")
    if deltas.shape != (n, 4):
        raise ValueError(f"deltas shape {deltas.shape} does not match batch {n}")
    if orient_probs.shape != orient_offsets.shape or orient_probs.shape[0] != n:
        raise ValueError("orientation arrays must share one (batch, bins) shape")
    if t.fg.any() and int(t.bins.max()) >= orient_probs.shape[1]:
        raise ValueError("target orientation bin exceeds prediction bin count")

    rows = np.arange(n)
    cls_nll = -np.log(cls_probs[rows, t.labels])

    orient_nll = np.zeros(n)
    box_l1 = np.zeros(n)
    offset_l1 = np.zeros(n)
    if t.fg.any():
        fg_rows = rows[t.fg]
        orient_nll[t.fg] = -np.log(orient_probs[fg_rows, t.bins[t.fg]])
        box_l1[t.fg] = smooth_l1(deltas[t.fg] - t.deltas[t.fg]).sum(axis=1)
        offset_l1[t.fg] = smooth_l1(
            orient_offsets[fg_rows, t.bins[t.fg]] - t.offsets[t.fg]
        )

    cls_term = _mean(cls_nll)
    orient_term = _mean(orient_nll)
    box_term = _mean(box_l1)
    offset_term = _mean(offset_l1)
    total = (
        weights.alpha * cls_term
        + weights.beta * orient_term
        + weights.gamma * box_term
        + weights.eta * offset_term
    )
    return Stage1Loss(total, cls_term, orient_term, box_term, offset_term)


def stage1_objective_grad(
    cls_probs: np.ndarray,
    deltas: np.ndarray,
    orient_probs: np.ndarray,
    orient_offsets: np.ndarray,
    targets: Sequence[Stage1Target],
    weights: LossWeights = LossWeights(),
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of stage1_objective's total w.r.t. each input array."""
    t = _stack_stage1_targets(targets)
    n = t.labels.shape[0]
    rows = np.arange(n)

    d_cls = np.zeros_like(cls_probs)
    d_cls[rows, t.labels] = -weights.alpha / (n * cls_probs[rows, t.labels])

    d_deltas = np.zeros_like(deltas)
    d_orient_probs = np.zeros_like(orient_probs)
    d_orient_offsets = np.zeros_like(orient_offsets)
    if t.fg.any():
        fg_rows = rows[t.fg]
        fg_bins = t.bins[t.fg]
        d_orient_probs[fg_rows, fg_bins] = -weights.beta / (
            n * orient_probs[fg_rows, fg_bins]
        )
        d_deltas[t.fg] = weights.gamma * smooth_l1_grad(deltas[t.fg] - t.deltas[t.fg]) / n
        d_orient_offsets[fg_rows, fg_bins] = (
            weights.eta * smooth_l1_grad(orient_offsets[fg_rows, fg_bins] - t.offsets[t.fg]) / n
        )
    return d_cls, d_deltas, d_orient_probs, d_orient_offsets


def stage1_loss(
    preds: Sequence[Stage1Prediction],
    targets: Sequence[Stage1Target],
    weights: LossWeights = LossWeights(),
) -> Stage1Loss:
    """Validated stage-1 loss over parallel prediction/target lists."""
    if len(preds) != len(targets):
        raise ValueError(f"got {len(preds)} predictions for {len(targets)} targets")
    if not preds:
        raise ValueError("empty batch")
    n_o = len(preds[0].orient_probs)
    if any(len(p.orient_probs) != n_o for p in preds):
        raise ValueError("all predictions must share one orientation bin count")
    return stage1_objective(
        np.array([p.cls_probs for p in preds]),
        np.array([p.deltas for p in preds]),
        np.array([p.orient_probs for p in preds]),
        np.array([p.orient_offsets for p in preds]),
        targets,
        weights,
    )


def stage2_objective(
    cls_probs: np.ndarray,
    deltas: np.ndarray,
    targets: Sequence[Stage2Target],
) -> Stage2Loss:
    """Stage-2 loss on raw arrays: classification plus axis-gated box terms."""
    n = len(targets)
    if cls_probs.shape != (n, N_CLASSES) or deltas.shape != (n, 4):
        raise ValueError("prediction arrays do not match the batch")
    labels = np.array([int(t.cls) for t in targets], dtype=np.int64)
    gated = np.array([bool(t.theta_ind) for t in targets])
    target_deltas = np.zeros((n, 4))
    for i, t in enumerate(targets):
        if t.theta_ind:
            target_deltas[i] = t.deltas

    cls_nll = -np.log(cls_probs[np.arange(n), labels])
    box_l1 = np.zeros(n)
    if gated.any():
        box_l1[gated] = smooth_l1(deltas[gated] - target_deltas[gated]).sum(axis=1)
    cls_term = _mean(cls_nll)
    box_term = _mean(box_l1)
    return Stage2Loss(cls_term + box_term, cls_term, box_term)


def stage2_objective_grad(
    cls_probs: np.ndarray,
    deltas: np.ndarray,
    targets: Sequence[Stage2Target],
) -> tuple[np.ndarray, np.ndarray]:
    n = len(targets)
    labels = np.array([int(t.cls) for t in targets], dtype=np.int64)
    rows = np.arange(n)
    d_cls = np.zeros_like(cls_probs)
    d_cls[rows, labels] = -1.0 / (n * cls_probs[rows, labels])
    d_deltas = np.zeros_like(deltas)
    for i, t in enumerate(targets):
        if t.theta_ind:
            d_deltas[i] = smooth_l1_grad(deltas[i] - np.asarray(t.deltas)) / n
    return d_cls, d_deltas


def stage2_loss(preds: Sequence[Stage2Prediction], targets: Sequence[Stage2Target]) -> Stage2Loss:
    if len(preds) != len(targets):
        raise ValueError(f"got {len(preds)} predictions for {len(targets)} targets")
    if not preds:
        raise ValueError("empty batch")
    return stage2_objective(
        np.array([p.cls_probs for p in preds]),
        np.array([p.deltas for p in preds]),
        targets,
    )


def gradient_check(
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    epsilon: float = 1e-5,
) -> float:
    """Max relative discrepancy between analytic and central-difference grads.

    loss_fn maps a flat parameter array to (value, gradient). The point must
    keep every |argument| of smooth_l1 away from 1 by more than epsilon.
    """
    point = np.asarray(point, dtype=np.float64)
    _, analytic = loss_fn(point)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != point.shape:
        raise ValueError("gradient shape does not match the point")
    worst = 0.0
    for idx in np.ndindex(*point.shape):
        hi = point.copy()
        lo = point.copy()
        hi[idx] += epsilon
        lo[idx] -= epsilon
        f_hi, _ = loss_fn(hi)
        f_lo, _ = loss_fn(lo)
        if not (math.isfinite(f_hi) and math.isfinite(f_lo)):
            raise ValueError(f"loss is not finite near index {idx}")
        fd = (f_hi - f_lo) / (2.0 * epsilon)
        an = float(analytic[idx])
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
        worst = max(worst, rel)
    return worst
