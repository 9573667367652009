"""Mask-tube scene graph toolkit.

Core surface: run-length mask algebra (:mod:`masktubes.rle`), scene graph
types and validation (:mod:`masktubes.core`), IOU/Hungarian tracking
(:mod:`masktubes.track`), GT-to-prediction assignment (:mod:`masktubes.assign`),
triplet recall metrics (:mod:`masktubes.metrics`), a non-learned relation
baseline (:mod:`masktubes.baseline`), seeded synthetic scenes with oracle
ledgers (:mod:`masktubes.synth`), and JSON interchange (:mod:`masktubes.io`).
"""

from .core import (
    MaskTube,
    RelationTriplet,
    SceneGraph,
    TimeSpan,
    VideoMeta,
    Violation,
    Vocabulary,
    canonicalize_relations,
    validate_scene_graph,
)
from .metrics import EvalConfig, EvalReport, evaluate, match_triplets, volume_iou
from .rle import BinaryMask, MaskError, PanopticFrame, Segment, decode, encode, mask_iou
from .track import TrackerConfig, build_tubes, hungarian

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "EvalConfig",
    "EvalReport",
    "MaskError",
    "MaskTube",
    "PanopticFrame",
    "RelationTriplet",
    "SceneGraph",
    "Segment",
    "TimeSpan",
    "TrackerConfig",
    "VideoMeta",
    "Violation",
    "Vocabulary",
    "build_tubes",
    "canonicalize_relations",
    "decode",
    "encode",
    "evaluate",
    "hungarian",
    "mask_iou",
    "match_triplets",
    "validate_scene_graph",
    "volume_iou",
    "__version__",
]
