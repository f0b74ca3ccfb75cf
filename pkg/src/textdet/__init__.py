"""Dense rotated-text detection: geometry primitives, label generation,
losses with analytic gradients, decoding, locality-aware NMS, a small
trainable FCN, and a synthetic benchmark harness."""

from .decode import QUAD, RBOX, DecodeConfig, DenseOutputs, decode
from .estimator import TextDetector
from .geometry import (
    Detection,
    OrientedRect,
    convex_intersection_area,
    min_area_rect,
    polygon_area,
    quad_iou,
    rbox_to_quad,
)
from .labelgen import (
    LabelConfig,
    QuadTargetMaps,
    RBoxTargetMaps,
    generate_quad_maps,
    generate_rbox_maps,
    generate_score_map,
    reference_lengths,
    shrink_quad,
)
from .losses import (
    LossConfig,
    angle_loss,
    balanced_xent,
    finite_difference_check,
    iou_loss,
    quad_loss,
    rbox_geometry_loss,
    total_loss,
)
from .metrics import EvalResult, evaluate
from .net import NetConfig, TinyTextNet
from .nms import MergeConfig, MergeStats, locality_aware_nms, standard_nms, weighted_merge
from .synth import SceneConfig, generate_scene
from .training import AdamState, adam_step, load_checkpoint, save_checkpoint, train

__all__ = [
    "QUAD", "RBOX", "DecodeConfig", "DenseOutputs", "decode",
    "TextDetector",
    "Detection", "OrientedRect", "convex_intersection_area", "min_area_rect",
    "polygon_area", "quad_iou", "rbox_to_quad",
    "LabelConfig", "QuadTargetMaps", "RBoxTargetMaps", "generate_quad_maps",
    "generate_rbox_maps", "generate_score_map", "reference_lengths", "shrink_quad",
    "LossConfig", "angle_loss", "balanced_xent", "finite_difference_check",
    "iou_loss", "quad_loss", "rbox_geometry_loss", "total_loss",
    "EvalResult", "evaluate",
    "NetConfig", "TinyTextNet",
    "MergeConfig", "MergeStats", "locality_aware_nms", "standard_nms", "weighted_merge",
    "SceneConfig", "generate_scene",
    "AdamState", "adam_step", "load_checkpoint", "save_checkpoint", "train",
]

__version__ = "0.1.0"
