"""Geometric and numerical core for orientation-aware object detection."""

__version__ = "0.1.0"

from .geometry import (
    AxisAlignedBox,
    OrientedBox,
    Point2,
    enclosing_aabb,
    iou_aabb,
    iou_obb,
    normalize_angle,
    obb_corners,
    obb_from_corners,
    rotate_aabb,
)
from .orientation import AngleBinning, OrientationLabel, decode_orientation, encode_orientation
from .opg import OrientedProposal, inverse_transform, make_orp, max_inscribed_rect
from .pooling import FeatureGrid, bilinear_sample, oaroi_pool, roi_pool
from .targets_losses import (
    ClassLabel,
    LossWeights,
    Stage1Prediction,
    Stage1Target,
    Stage2Prediction,
    Stage2Target,
    apply_box_deltas,
    assign_stage1_targets,
    encode_box_deltas,
    gradient_check,
    smooth_l1,
    stage1_loss,
    stage2_loss,
)
from .nms import Detection, nms
from .eval import (
    EvalResult,
    GroundTruthInstance,
    ImageSample,
    average_precision,
    confidence_sweep,
    evaluate_detections,
    match_detections,
)
from .data import (
    SceneAnnotation,
    SynthParams,
    SyntheticScene,
    generate_synthetic_scene,
    load_annotations,
    load_detections,
    obb_rot,
    save_annotations,
    save_detections,
)

__all__ = [
    "AngleBinning",
    "AxisAlignedBox",
    "ClassLabel",
    "Detection",
    "EvalResult",
    "FeatureGrid",
    "GroundTruthInstance",
    "ImageSample",
    "LossWeights",
    "OrientationLabel",
    "OrientedBox",
    "OrientedProposal",
    "Point2",
    "SceneAnnotation",
    "Stage1Prediction",
    "Stage1Target",
    "Stage2Prediction",
    "Stage2Target",
    "SynthParams",
    "SyntheticScene",
    "apply_box_deltas",
    "assign_stage1_targets",
    "average_precision",
    "bilinear_sample",
    "confidence_sweep",
    "decode_orientation",
    "encode_box_deltas",
    "encode_orientation",
    "enclosing_aabb",
    "evaluate_detections",
    "generate_synthetic_scene",
    "gradient_check",
    "inverse_transform",
    "iou_aabb",
    "iou_obb",
    "load_annotations",
    "load_detections",
    "make_orp",
    "match_detections",
    "max_inscribed_rect",
    "nms",
    "normalize_angle",
    "oaroi_pool",
    "obb_corners",
    "obb_from_corners",
    "obb_rot",
    "roi_pool",
    "rotate_aabb",
    "save_annotations",
    "save_detections",
    "smooth_l1",
    "stage1_loss",
    "stage2_loss",
]
