"""Ground-truth-to-prediction mapping: tube correspondence and relation labels.

Used both to mint per-frame relation labels on predicted tubes (supervision
for external trainers) and as a diagnostic for tracking quality.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import MaskTube, SceneGraph
from .track import hungarian
from .rle import mask_iou


@dataclass(eq=False)
class PairingMatrix:
    """Boolean matrix over ordered entity pairs related at one frame."""

    entity_ids: tuple[int, ...]
    cells: np.ndarray
    frame_index: int

    def cell(self, subject_id: int, object_id: int) -> bool:
        i = self.entity_ids.index(subject_id)
        j = self.entity_ids.index(object_id)
        return bool(self.cells[i, j])


@dataclass(frozen=True)
class FramePairLabel:
    """Predicates asserted on a predicted (subject, object) pair at one frame."""

    frame_index: int
    subject_pred_id: int
    object_pred_id: int
    predicate_ids: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "predicate_ids", frozenset(self.predicate_ids))
        if not self.predicate_ids:
            raise ValueError("predicate_ids may not be empty")


def tube_agreement(pred: MaskTube, gt: MaskTube, mask_gate: float = 0.5) -> float:
    """Fraction of jointly-covered frames where mask IOU clears the gate.

    Numerator counts frames where both tubes have a mask and their IOU is
    strictly above ``mask_gate``; denominator counts frames where either tube
    has a mask.  0.0 when both tubes are empty.
    """
    pred_frames = set(pred.frames)
    gt_frames = set(gt.frames)
    either = pred_frames | gt_frames
    if not either:
        return 0.0
    hits = sum(
        1
        for t in pred_frames & gt_frames
        if mask_iou(pred.frames[t], gt.frames[t]) > mask_gate
    )
    return hits / len(either)


def match_tubes(
    pred: Sequence[MaskTube],
    gt: Sequence[MaskTube],
    mask_gate: float = 0.5,
) -> dict[int, int]:
    """Class-gated injective correspondence pred entity id -> gt entity id.

    Maximizes total tube agreement over all injective mappings; pairs with
    zero agreement (including all cross-class pairs) stay unmatched.
    """
    if not pred or not gt:
        return {}
    agreement = np.zeros((len(pred), len(gt)))
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            if p.class_id != g.class_id:
                continue
            agreement[i, j] = tube_agreement(p, g, mask_gate)
    # cost 1 - agreement makes the min-cost assignment the max-agreement one;
    # zero-agreement pairs cost exactly as much as leaving both sides unmatched
    cost = 1.0 - agreement
    out = {}
    for i, j in hungarian(cost.tolist()):
        if agreement[i, j] > 0.0:
            out[pred[i].entity_id] = gt[j].entity_id
    return out


def gt_pairing_matrix(g: SceneGraph, t: int) -> PairingMatrix:
    """Which ordered entity pairs are related at frame ``t``."""
    if not 0 <= t < g.meta.num_frames:
        raise ValueError(f"frame {t} out of range [0, {g.meta.num_frames})")
    ids = tuple(tube.entity_id for tube in g.tubes)
    index = {eid: i for i, eid in enumerate(ids)}
    cells = np.zeros((len(ids), len(ids)), dtype=bool)
    for rel in g.relations:
        if t in rel.span:
            cells[index[rel.subject_id], index[rel.object_id]] = True
    return PairingMatrix(entity_ids=ids, cells=cells, frame_index=t)


def form_relation_labels(
    pred: Sequence[MaskTube],
    gt: SceneGraph,
    mask_gate: float = 0.5,
) -> list[FramePairLabel]:
    """Map GT relations onto predicted pairs, frame by frame.

    For every GT relation and every frame in its span, a label lands on the
    corresponding predicted pair iff both the predicted subject and object
    masks at that frame have IOU strictly above ``mask_gate`` with their GT
    counterparts.  Predicate sets on the same (frame, pair) are unioned.
    """
    correspondence = match_tubes(pred, gt.tubes, mask_gate)
    gt_to_pred = {g: p for p, g in correspondence.items()}
    pred_map = {tube.entity_id: tube for tube in pred}
    gt_map = gt.tube_map()

    accumulated: dict[tuple[int, int, int], set[int]] = {}
    for rel in gt.relations:
        pred_subject = gt_to_pred.get(rel.subject_id)
        pred_object = gt_to_pred.get(rel.object_id)
        if pred_subject is None or pred_object is None:
            continue
        ps, po = pred_map[pred_subject], pred_map[pred_object]
        gs, go = gt_map[rel.subject_id], gt_map[rel.object_id]
        for t in rel.span.frames():
            masks = (ps.mask_at(t), gs.mask_at(t), po.mask_at(t), go.mask_at(t))
            if any(m is None for m in masks):
                continue
            if mask_iou(masks[0], masks[1]) > mask_gate and mask_iou(masks[2], masks[3]) > mask_gate:
                accumulated.setdefault((t, pred_subject, pred_object), set()).add(
                    rel.predicate_id
                )

    return [
        FramePairLabel(t, s, o, frozenset(predicates))
        for (t, s, o), predicates in sorted(accumulated.items())
    ]
