"""Triplet recall over mask tubes: volume IOU, matching, R@K and mR@K.

A ground-truth triplet is recalled when a prediction carries the same
subject/object/predicate labels and the pair of tubes overlaps it with
volume IOU above the time threshold.  Volume IOU counts a frame as
intersection only when both the subject and the object mask clear the mask
IOU gate; the union is the union of the two scattered spans.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import MaskTube, SceneGraph, TimeSpan, canonicalize_relations
from .rle import BinaryMask, mask_iou


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation grid: K values x time-IOU thresholds, plus the mask gate."""

    k_values: tuple[int, ...] = (20, 50, 100)
    vol_thresholds: tuple[float, ...] = (0.5, 0.1)
    mask_gate: float = 0.5
    corpus_wide_k: bool = False

    def __post_init__(self):
        ks = tuple(sorted(set(int(k) for k in self.k_values)))
        thresholds = tuple(sorted(set(float(t) for t in self.vol_thresholds), reverse=True))
        object.__setattr__(self, "k_values", ks)
        object.__setattr__(self, "vol_thresholds", thresholds)
        if not ks:
            raise ValueError("k_values may not be empty")
        if any(k < 1 for k in ks):
            raise ValueError("k_values must be positive")
        if not thresholds:
            raise ValueError("vol_thresholds may not be empty")
        for t in thresholds + (self.mask_gate,):
            if not 0.0 < t <= 1.0:
                raise ValueError(f"thresholds must be in (0,1], got {t}")


@dataclass(frozen=True)
class GroundedRelation:
    """A relation triplet bound to its subject and object tubes."""

    subject: MaskTube
    object: MaskTube
    predicate_id: int
    span: TimeSpan
    score: float

    @property
    def subject_class(self) -> int:
        return self.subject.class_id

    @property
    def object_class(self) -> int:
        return self.object.class_id

    @property
    def label(self) -> tuple[int, int, int]:
        return (self.subject.class_id, self.object.class_id, self.predicate_id)

    @property
    def entity_key(self) -> tuple[int, int, int]:
        return (self.subject.entity_id, self.object.entity_id, self.predicate_id)


def ground_relations(g: SceneGraph, canonicalize: bool = True) -> list[GroundedRelation]:
    """Bind each relation of ``g`` to its tubes (canonicalizing first by default)."""
    tubes = g.tube_map()
    relations = canonicalize_relations(g.relations) if canonicalize else list(g.relations)
    out = []
    for rel in relations:
        try:
            subject = tubes[rel.subject_id]
            obj = tubes[rel.object_id]
        except KeyError as exc:
            raise ValueError(
                f"relation references missing entity {exc.args[0]} in video {g.meta.video_id}"
            ) from None
        out.append(GroundedRelation(subject, obj, rel.predicate_id, rel.span, rel.score))
    return out


def frame_hit(
    pred_s: BinaryMask | None,
    pred_o: BinaryMask | None,
    gt_s: BinaryMask | None,
    gt_o: BinaryMask | None,
    gate: float = 0.5,
) -> bool:
    """True iff all four masks exist and both IOUs are strictly above the gate."""
    if pred_s is None or pred_o is None or gt_s is None or gt_o is None:
        return False
    return mask_iou(pred_s, gt_s) > gate and mask_iou(pred_o, gt_o) > gate


def volume_iou(pred: GroundedRelation, gt: GroundedRelation, gate: float = 0.5) -> float:
    """Tube-pair overlap: gate-passing common frames over the span union.

    Union frames are counted whether or not masks exist on them; a frame
    without masks simply cannot be a hit.
    """
    union = pred.span.union_frame_count(gt.span)
    intersection = 0
    for t in pred.span.common_frames(gt.span):
        if frame_hit(
            pred.subject.mask_at(t),
            pred.object.mask_at(t),
            gt.subject.mask_at(t),
            gt.object.mask_at(t),
            gate,
        ):
            intersection += 1
    return intersection / union


@dataclass(frozen=True)
class MatchRecord:
    """One recalled GT triplet: which prediction matched it and how well."""

    pred_index: int
    gt_index: int
    volume_iou: float


def prediction_order(preds: Sequence[GroundedRelation]) -> list[int]:
    """Deterministic ranking: descending score, then labels, then input order."""
    return sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].score, *preds[i].label, i),
    )


def _check_canonical_gts(gts: Sequence[GroundedRelation]) -> None:
    by_key: dict[tuple[int, int, int], list[GroundedRelation]] = {}
    for gt in gts:
        by_key.setdefault(gt.entity_key, []).append(gt)
    for key, members in by_key.items():
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                if members[i].span.common_frames(members[j].span):
                    raise ValueError(
                        f"ground truth not canonicalized: duplicate key {key}"
                        " with overlapping spans"
                    )


def match_triplets(
    preds: Sequence[GroundedRelation],
    gts: Sequence[GroundedRelation],
    threshold: float = 0.5,
    gate: float = 0.5,
) -> list[MatchRecord]:
    """Greedy one-to-one matching of predictions onto GT triplets.

    Predictions are visited in ranking order; each matches the unmatched GT
    triplet with equal (subject class, object class, predicate) labels and the
    highest volume IOU above ``threshold`` (ties fall to the earlier GT).
    Matching best-overlap-first keeps the recalled count monotone when the
    threshold is relaxed, which an input-order scan does not.
    """
    _check_canonical_gts(gts)
    gts_by_label: dict[tuple[int, int, int], list[int]] = {}
    for j, gt in enumerate(gts):
        gts_by_label.setdefault(gt.label, []).append(j)

    taken = set()
    records = []
    for i in prediction_order(preds):
        pred = preds[i]
        best_j = -1
        best_iou = threshold
        for j in gts_by_label.get(pred.label, ()):
            if j in taken:
                continue
            iou = volume_iou(pred, gts[j], gate)
            if iou > best_iou:
                best_iou = iou
                best_j = j
        if best_j >= 0:
            taken.add(best_j)
            records.append(MatchRecord(i, best_j, best_iou))
    return sorted(records, key=lambda r: r.pred_index)


@dataclass
class CellStats:
    """Aggregates for one (K, threshold) grid cell."""

    k: int
    threshold: float
    matched: int = 0
    total: int = 0
    per_predicate: dict[int, list[int]] = field(default_factory=dict)  # pid -> [matched, total]

    @property
    def recall(self) -> float:
        return self.matched / self.total if self.total else 0.0

    @property
    def mean_recall(self) -> float:
        if not self.per_predicate:
            return 0.0
        recalls = [m / t for m, t in self.per_predicate.values() if t]
        return sum(recalls) / len(recalls) if recalls else 0.0


@dataclass
class VideoResult:
    video_id: str
    gt_count: int
    pred_count: int
    gt_predicates: list[int]
    matches: dict[tuple[int, float], list[MatchRecord]]


@dataclass
class EvalReport:
    """R@K / mR@K grid with per-predicate breakdown and per-video match ledger."""

    config: EvalConfig
    cells: dict[tuple[int, float], CellStats]
    videos: list[VideoResult]
    warnings: list[str]

    @property
    def total_gt(self) -> int:
        return sum(v.gt_count for v in self.videos)

    def recall(self, k: int, threshold: float) -> float:
        return self.cells[(k, threshold)].recall

    def mean_recall(self, k: int, threshold: float) -> float:
        return self.cells[(k, threshold)].mean_recall

    def to_dict(self) -> dict:
        """Deterministic plain-JSON structure mirroring the (K x threshold) grid."""
        cells = []
        for k in self.config.k_values:
            for thr in self.config.vol_thresholds:
                cell = self.cells[(k, thr)]
                cells.append(
                    {
                        "k": k,
                        "threshold": thr,
                        "matched": cell.matched,
                        "total": cell.total,
                        "recall": cell.recall,
                        "mean_recall": cell.mean_recall,
                        "per_predicate": [
                            {
                                "predicate": pid,
                                "matched": counts[0],
                                "total": counts[1],
                                "recall": counts[0] / counts[1] if counts[1] else 0.0,
                            }
                            for pid, counts in sorted(cell.per_predicate.items())
                        ],
                    }
                )
        videos = []
        for video in self.videos:
            matches = []
            for k in self.config.k_values:
                for thr in self.config.vol_thresholds:
                    records = video.matches.get((k, thr), [])
                    matches.append(
                        {
                            "k": k,
                            "threshold": thr,
                            "pairs": [
                                [r.pred_index, r.gt_index, r.volume_iou] for r in records
                            ],
                        }
                    )
            videos.append(
                {
                    "video_id": video.video_id,
                    "gt_count": video.gt_count,
                    "pred_count": video.pred_count,
                    "matches": matches,
                }
            )
        return {
            "config": {
                "k_values": list(self.config.k_values),
                "thresholds": list(self.config.vol_thresholds),
                "mask_gate": self.config.mask_gate,
                "corpus_wide_k": self.config.corpus_wide_k,
            },
            "num_videos": len(self.videos),
            "total_gt": self.total_gt,
            "cells": cells,
            "videos": videos,
            "warnings": list(self.warnings),
        }


def _video_matches(
    gt_rels: list[GroundedRelation],
    pred_rels: list[GroundedRelation],
    cfg: EvalConfig,
    keep_for_k: dict[int, set[int]] | None = None,
) -> dict[tuple[int, float], list[MatchRecord]]:
    order = prediction_order(pred_rels)
    out = {}
    for k in cfg.k_values:
        if keep_for_k is None:
            top_indices = order[:k]
        else:
            top_indices = [i for i in order if i in keep_for_k[k]]
        top = [pred_rels[i] for i in top_indices]
        for thr in cfg.vol_thresholds:
            records = match_triplets(top, gt_rels, thr, cfg.mask_gate)
            # report indices in terms of the canonicalized prediction list
            out[(k, thr)] = [
                MatchRecord(top_indices[r.pred_index], r.gt_index, r.volume_iou)
                for r in records
            ]
    return out


def evaluate(
    gt_graphs: Mapping[str, SceneGraph],
    pred_graphs: Mapping[str, SceneGraph],
    cfg: EvalConfig | None = None,
    workers: int | None = None,
) -> EvalReport:
    """Corpus-level R@K / mR@K over aligned per-video scene graphs.

    Top-K is applied per video by default (``corpus_wide_k`` pools scores
    across videos instead).  Videos missing predictions contribute zero
    matches and a warning.  The report is deterministic regardless of the
    worker count.
    """
    cfg = cfg or EvalConfig()
    warnings = []
    video_ids = sorted(gt_graphs)
    for extra in sorted(set(pred_graphs) - set(gt_graphs)):
        warnings.append(f"prediction for unknown video {extra!r} ignored")

    grounded: dict[str, tuple[list[GroundedRelation], list[GroundedRelation]]] = {}

    def _ground(vid: str):
        gt_rels = ground_relations(gt_graphs[vid])
        if vid in pred_graphs:
            pred_rels = ground_relations(pred_graphs[vid])
        else:
            pred_rels = []
        return vid, gt_rels, pred_rels

    if workers is not None and workers > 1 and len(video_ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_ground, video_ids))
    else:
        results = [_ground(vid) for vid in video_ids]
    for vid, gt_rels, pred_rels in results:
        grounded[vid] = (gt_rels, pred_rels)
        if vid not in pred_graphs:
            warnings.append(f"no predictions for video {vid!r}; counted as zero matches")

    keep_per_video: dict[str, dict[int, set[int]] | None] = {vid: None for vid in video_ids}
    if cfg.corpus_wide_k:
        # rank all predictions corpus-wide; the top-K cut is then global, and
        # each video keeps only its share of the cut for that K
        pool_entries = []
        for vid in video_ids:
            _, pred_rels = grounded[vid]
            for i in prediction_order(pred_rels):
                pred = pred_rels[i]
                pool_entries.append(((-pred.score, *pred.label, vid, i), vid, i))
        pool_entries.sort(key=lambda e: e[0])
        keep_per_video = {vid: {k: set() for k in cfg.k_values} for vid in video_ids}
        for k in cfg.k_values:
            for _, vid, i in pool_entries[:k]:
                keep_per_video[vid][k].add(i)

    cells = {
        (k, thr): CellStats(k=k, threshold=thr)
        for k in cfg.k_values
        for thr in cfg.vol_thresholds
    }
    videos = []

    def _run_video(vid: str) -> VideoResult:
        gt_rels, pred_rels = grounded[vid]
        matches = _video_matches(gt_rels, pred_rels, cfg, keep_per_video[vid])
        return VideoResult(
            video_id=vid,
            gt_count=len(gt_rels),
            pred_count=len(pred_rels),
            gt_predicates=[gt.predicate_id for gt in gt_rels],
            matches=matches,
        )

    if workers is not None and workers > 1 and len(video_ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            videos = list(pool.map(_run_video, video_ids))
    else:
        videos = [_run_video(vid) for vid in video_ids]

    for video in videos:
        for (k, thr), records in video.matches.items():
            cell = cells[(k, thr)]
            cell.total += video.gt_count
            cell.matched += len(records)
            for pid in video.gt_predicates:
                cell.per_predicate.setdefault(pid, [0, 0])[1] += 1
            gt_rels, _ = grounded[video.video_id]
            for record in records:
                pid = gt_rels[record.gt_index].predicate_id
                cell.per_predicate[pid][0] += 1

    return EvalReport(config=cfg, cells=cells, videos=videos, warnings=warnings)
