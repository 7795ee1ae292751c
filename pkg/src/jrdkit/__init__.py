"""Task-aware image coding driven by just-recognizable-difference levels."""

from .annotation import (
    build_annotations,
    dataset_stats,
    jrd_from_labels,
    make_label,
)
from .codec import Bitstream, DecodeError, QfMap, decode, encode, encode_uniform, measure_rate
from .core import (
    AttributeTriplet,
    BoundingBox,
    ImagePlane,
    JrdAnnotation,
    KeypointSet,
    Mask,
    TaskResponse,
    attribute_triplet,
)
from .evaluation import (
    QualityDeltaReport,
    RateAccuracyCurve,
    average_precision,
    bd_metric,
    bd_rate,
    quality_delta_report,
    rate_accuracy_curve,
)
from .metrics import box_iou, fidelity, mask_iou, oks, psnr, ssim, task_similarity
from .predictor import JrdPredictor, ModelConfig, grad_check, predict, train
from .vcm import VcmJob, VcmObject, jrd_to_reference, qp_to_qf, search_qf, vcm_encode

__version__ = "0.1.0"

__all__ = [
    "AttributeTriplet",
    "Bitstream",
    "BoundingBox",
    "DecodeError",
    "ImagePlane",
    "JrdAnnotation",
    "JrdPredictor",
    "KeypointSet",
    "Mask",
    "ModelConfig",
    "QfMap",
    "QualityDeltaReport",
    "RateAccuracyCurve",
    "TaskResponse",
    "VcmJob",
    "VcmObject",
    "attribute_triplet",
    "average_precision",
    "bd_metric",
    "bd_rate",
    "box_iou",
    "build_annotations",
    "dataset_stats",
    "decode",
    "encode",
    "encode_uniform",
    "fidelity",
    "grad_check",
    "jrd_from_labels",
    "jrd_to_reference",
    "make_label",
    "mask_iou",
    "measure_rate",
    "oks",
    "predict",
    "psnr",
    "qp_to_qf",
    "quality_delta_report",
    "rate_accuracy_curve",
    "search_qf",
    "ssim",
    "task_similarity",
    "train",
]
