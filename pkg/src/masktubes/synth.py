"""Seeded synthetic scenes with controlled corruption and an oracle ledger.

Scenes are scripted from rectangles and discs on piecewise-linear waypoint
paths; depth layers resolve the per-frame non-overlap constraint exactly, so
every rasterization is rational and bit-reproducible.  ``perturb`` corrupts a
ground-truth graph under seeded noise and simultaneously measures, with its
own dense-grid arithmetic, how recallable each triplet remains -- the ledger
is deliberately independent of the run-length and metric code it checks.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rle
from .core import (
    MaskTube,
    RelationTriplet,
    SceneGraph,
    TimeSpan,
    VideoMeta,
    canonicalize_relations,
)
from .rle import BinaryMask, PanopticFrame, Segment


@dataclass(frozen=True)
class RectShape:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("rectangle sides must be positive")


@dataclass(frozen=True)
class DiscShape:
    radius: int

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("disc radius must be positive")


@dataclass(frozen=True)
class ScriptObject:
    object_id: int
    class_id: int
    shape: RectShape | DiscShape
    layer: int
    waypoints: tuple[tuple[int, float, float], ...]  # (frame, cx, cy)

    def __post_init__(self):
        points = tuple((int(t), float(x), float(y)) for t, x, y in self.waypoints)
        object.__setattr__(self, "waypoints", points)
        if not points:
            raise ValueError(f"object {self.object_id} needs at least one waypoint")
        frames = [t for t, _, _ in points]
        if frames != sorted(frames) or len(set(frames)) != len(frames):
            raise ValueError(f"object {self.object_id} waypoints must be strictly ordered")


@dataclass(frozen=True)
class ScriptRelation:
    subject_id: int
    object_id: int
    predicate_id: int
    spans: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class SceneScript:
    video_id: str
    height: int
    width: int
    num_frames: int
    objects: tuple[ScriptObject, ...]
    relations: tuple[ScriptRelation, ...] = ()
    fps: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "relations", tuple(self.relations))
        if self.height < 1 or self.width < 1 or self.num_frames < 1:
            raise ValueError("canvas and frame count must be positive")
        ids = [obj.object_id for obj in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique")
        layers = [obj.layer for obj in self.objects]
        if len(set(layers)) != len(layers):
            raise ValueError("layers must be totally ordered (unique)")
        known = set(ids)
        for obj in self.objects:
            for t, x, y in obj.waypoints:
                if not 0 <= t < self.num_frames:
                    raise ValueError(f"object {obj.object_id} waypoint frame {t} out of range")
                if not (0 <= x < self.width and 0 <= y < self.height):
                    raise ValueError(f"object {obj.object_id} waypoint ({x},{y}) off canvas")
        for rel in self.relations:
            if rel.subject_id not in known or rel.object_id not in known:
                raise ValueError("relation references unknown object id")
            if rel.subject_id == rel.object_id:
                raise ValueError("relation subject and object must differ")
            for s, e in rel.spans:
                if not (0 <= s < e <= self.num_frames):
                    raise ValueError(f"relation span [{s},{e}) out of range")


def _position(obj: ScriptObject, t: int) -> tuple[int, int]:
    """Piecewise-linear center at frame t, rounded half-up to pixel centers."""
    points = obj.waypoints
    if t <= points[0][0]:
        x, y = points[0][1], points[0][2]
    elif t >= points[-1][0]:
        x, y = points[-1][1], points[-1][2]
    else:
        for (t0, x0, y0), (t1, x1, y1) in zip(points, points[1:]):
            if t0 <= t <= t1:
                f = (t - t0) / (t1 - t0)
                x = x0 + f * (x1 - x0)
                y = y0 + f * (y1 - y0)
                break
    return int(np.floor(x + 0.5)), int(np.floor(y + 0.5))


def _rasterize(obj: ScriptObject, t: int, height: int, width: int) -> np.ndarray:
    cx, cy = _position(obj, t)
    grid = np.zeros((height, width), dtype=bool)
    if isinstance(obj.shape, RectShape):
        r0 = max(0, cy - obj.shape.height // 2)
        c0 = max(0, cx - obj.shape.width // 2)
        r1 = min(height, cy - obj.shape.height // 2 + obj.shape.height)
        c1 = min(width, cx - obj.shape.width // 2 + obj.shape.width)
        if r1 > r0 and c1 > c0:
            grid[r0:r1, c0:c1] = True
    else:
        r = obj.shape.radius
        rows = np.arange(max(0, cy - r), min(height, cy + r + 1))
        cols = np.arange(max(0, cx - r), min(width, cx + r + 1))
        if rows.size and cols.size:
            dy = (rows - cy)[:, None]
            dx = (cols - cx)[None, :]
            grid[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1] = (
                dy * dy + dx * dx <= r * r
            )
    return grid


def generate(script: SceneScript, seed: int = 0) -> tuple[SceneGraph, list[PanopticFrame]]:
    """Rasterize a script into a valid scene graph plus its panoptic frames.

    Higher layers occlude lower ones, which resolves the non-overlap
    constraint by depth.  Deterministic under (script, seed); the seed is
    reserved for stochastic script elements and does not affect geometry.
    """
    del seed  # geometry is fully scripted
    height, width = script.height, script.width
    front_to_back = sorted(script.objects, key=lambda o: -o.layer)
    tube_frames: dict[int, dict[int, BinaryMask]] = {o.object_id: {} for o in script.objects}
    frames: list[PanopticFrame] = []
    for t in range(script.num_frames):
        occupied = np.zeros((height, width), dtype=bool)
        visible: dict[int, BinaryMask] = {}
        for obj in front_to_back:
            raster = _rasterize(obj, t, height, width)
            shown = raster & ~occupied
            occupied |= raster
            if shown.any():
                mask = rle.encode(shown)
                visible[obj.object_id] = mask
                tube_frames[obj.object_id][t] = mask
        segments = tuple(
            Segment(obj.object_id, obj.class_id, 1.0, visible[obj.object_id])
            for obj in script.objects
            if obj.object_id in visible
        )
        frames.append(PanopticFrame(t, height, width, segments))

    tubes = []
    for obj in script.objects:
        if not tube_frames[obj.object_id]:
            warnings.warn(
                f"object {obj.object_id} is fully occluded for the whole video",
                RuntimeWarning,
                stacklevel=2,
            )
        tubes.append(
            MaskTube(
                entity_id=obj.object_id,
                class_id=obj.class_id,
                frames=tube_frames[obj.object_id],
                score=1.0,
            )
        )

    relations = canonicalize_relations(
        [
            RelationTriplet(
                subject_id=rel.subject_id,
                object_id=rel.object_id,
                predicate_id=rel.predicate_id,
                span=TimeSpan.from_intervals(rel.spans),
                score=1.0,
            )
            for rel in script.relations
        ]
    )
    meta = VideoMeta(
        video_id=script.video_id,
        num_frames=script.num_frames,
        height=height,
        width=width,
        fps=script.fps,
    )
    return SceneGraph(meta=meta, tubes=tubes, relations=tuple(relations)), frames


@dataclass(frozen=True)
class NoiseConfig:
    mask_erode_px: int = 0
    span_clip_frames: int = 0
    drop_triplet_rate: float = 0.0
    id_switch_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mask_erode_px < 0 or self.span_clip_frames < 0:
            raise ValueError("erosion and clipping must be non-negative")
        for rate in (self.drop_triplet_rate, self.id_switch_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"rates must be in [0,1], got {rate}")


# --- dense-grid arithmetic, intentionally independent of the rle module ---


def _expand_runs(mask: BinaryMask) -> np.ndarray:
    """Plain run expansion used only by the oracle path."""
    flat = np.zeros(mask.height * mask.width, dtype=bool)
    pos = 0
    value = False
    for run in mask.runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(mask.height, mask.width)


def _dense_iou(a: np.ndarray | None, b: np.ndarray | None) -> float:
    if a is None or b is None:
        return 0.0
    inter = int(np.logical_and(a, b).sum())
    union = int(np.logical_or(a, b).sum())
    return inter / union if union else 0.0


def _erode(grid: np.ndarray, px: int) -> np.ndarray:
    out = grid
    for _ in range(px):
        shrunk = out.copy()
        shrunk[1:, :] &= out[:-1, :]
        shrunk[:-1, :] &= out[1:, :]
        shrunk[:, 1:] &= out[:, :-1]
        shrunk[:, :-1] &= out[:, 1:]
        shrunk[0, :] = False
        shrunk[-1, :] = False
        shrunk[:, 0] = False
        shrunk[:, -1] = False
        out = shrunk
    return out


def _clip_span(span: TimeSpan, k: int) -> TimeSpan | None:
    if k == 0:
        return span
    intervals = [(s + k, e - k) for s, e in span.intervals if e - k > s + k]
    return TimeSpan(tuple(intervals)) if intervals else None


@dataclass
class LedgerEntry:
    """Oracle record for one GT triplet after corruption."""

    subject_id: int
    object_id: int
    predicate_id: int
    survived: bool
    volume_iou: float
    gate_frames: tuple[int, ...]
    recallable: dict[float, bool]


@dataclass
class CorruptionLedger:
    """Per-triplet recallability, measured directly on dense grids."""

    thresholds: tuple[float, ...]
    mask_gate: float
    entries: list[LedgerEntry]

    def matched_total(self, threshold: float) -> tuple[int, int]:
        matched = sum(1 for e in self.entries if e.recallable[threshold])
        return matched, len(self.entries)

    def predicted_recall(self, threshold: float) -> float:
        matched, total = self.matched_total(threshold)
        return matched / total if total else 0.0

    def per_predicate(self, threshold: float) -> dict[int, tuple[int, int]]:
        out: dict[int, list[int]] = {}
        for entry in self.entries:
            counts = out.setdefault(entry.predicate_id, [0, 0])
            counts[1] += 1
            if entry.recallable[threshold]:
                counts[0] += 1
        return {pid: (m, t) for pid, (m, t) in sorted(out.items())}

    def predicted_mean_recall(self, threshold: float) -> float:
        table = self.per_predicate(threshold)
        if not table:
            return 0.0
        return sum(m / t for m, t in table.values()) / len(table)

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "mask_gate": self.mask_gate,
            "entries": [
                {
                    "subject": e.subject_id,
                    "object": e.object_id,
                    "predicate": e.predicate_id,
                    "survived": e.survived,
                    "volume_iou": e.volume_iou,
                    "gate_frames": list(e.gate_frames),
                    "recallable": {repr(t): e.recallable[t] for t in self.thresholds},
                }
                for e in self.entries
            ],
            "predicted_recall": {
                repr(t): self.predicted_recall(t) for t in self.thresholds
            },
        }


def perturb(
    gt: SceneGraph,
    noise: NoiseConfig,
    thresholds: Sequence[float] = (0.5, 0.1),
    mask_gate: float = 0.5,
) -> tuple[SceneGraph, CorruptionLedger]:
    """Corrupt a GT graph under seeded noise and measure what stays recallable.

    Applies mask erosion, identity switches between same-class tubes, span
    clipping, and triplet drops.  For every GT triplet the ledger records its
    post-corruption volume IOU and gate-passing frames, computed on dense
    grids without touching the run-length or metric code paths.
    """
    rng = np.random.default_rng(noise.seed)
    thresholds = tuple(float(t) for t in thresholds)

    gt_dense: dict[int, dict[int, np.ndarray]] = {}
    pred_dense: dict[int, dict[int, np.ndarray]] = {}
    for tube in gt.tubes:
        gt_dense[tube.entity_id] = {t: _expand_runs(m) for t, m in tube.frames.items()}
        corrupted = {}
        for t, grid in gt_dense[tube.entity_id].items():
            eroded = _erode(grid, noise.mask_erode_px)
            if eroded.any():
                corrupted[t] = eroded
        pred_dense[tube.entity_id] = corrupted

    # identity switches: swap masks of a same-class tube pair from a frame on
    tubes_by_class: dict[int, list[int]] = {}
    for tube in gt.tubes:
        tubes_by_class.setdefault(tube.class_id, []).append(tube.entity_id)
    for class_id in sorted(tubes_by_class):
        members = sorted(tubes_by_class[class_id])
        for a, b in zip(members, members[1:]):
            if rng.random() >= noise.id_switch_rate:
                continue
            switch_at = int(rng.integers(gt.meta.num_frames // 4, max(gt.meta.num_frames * 3 // 4, gt.meta.num_frames // 4 + 1)))
            masks_a, masks_b = pred_dense[a], pred_dense[b]
            tail_a = {t: m for t, m in masks_a.items() if t >= switch_at}
            tail_b = {t: m for t, m in masks_b.items() if t >= switch_at}
            pred_dense[a] = {t: m for t, m in masks_a.items() if t < switch_at} | tail_b
            pred_dense[b] = {t: m for t, m in masks_b.items() if t < switch_at} | tail_a

    gt_relations = canonicalize_relations(gt.relations)
    survived_flags: list[bool] = []
    clipped_spans: list[TimeSpan | None] = []
    for rel in gt_relations:
        clipped = _clip_span(rel.span, noise.span_clip_frames)
        dropped = rng.random() < noise.drop_triplet_rate
        survived_flags.append(clipped is not None and not dropped)
        clipped_spans.append(clipped)

    pred_tubes = []
    for tube in gt.tubes:
        pred_tubes.append(
            MaskTube(
                entity_id=tube.entity_id,
                class_id=tube.class_id,
                frames={t: rle.encode(g) for t, g in sorted(pred_dense[tube.entity_id].items())},
                score=tube.score,
            )
        )
    pred_relations = []
    for rel, survived, clipped in zip(gt_relations, survived_flags, clipped_spans):
        if not survived:
            continue
        pred_relations.append(
            RelationTriplet(
                subject_id=rel.subject_id,
                object_id=rel.object_id,
                predicate_id=rel.predicate_id,
                span=clipped,
                score=rel.score,
            )
        )
    pred_graph = SceneGraph(meta=gt.meta, tubes=tuple(pred_tubes), relations=tuple(pred_relations))

    entries = []
    for rel, survived, clipped in zip(gt_relations, survived_flags, clipped_spans):
        gt_span_frames = set(rel.span.frames())
        pred_span_frames = set(clipped.frames()) if clipped is not None else set()
        union = len(gt_span_frames | pred_span_frames)
        gate_frames = []
        for t in sorted(gt_span_frames & pred_span_frames):
            iou_s = _dense_iou(
                pred_dense[rel.subject_id].get(t), gt_dense[rel.subject_id].get(t)
            )
            iou_o = _dense_iou(
                pred_dense[rel.object_id].get(t), gt_dense[rel.object_id].get(t)
            )
            if iou_s > mask_gate and iou_o > mask_gate:
                gate_frames.append(t)
        viou = len(gate_frames) / union if union else 0.0
        entries.append(
            LedgerEntry(
                subject_id=rel.subject_id,
                object_id=rel.object_id,
                predicate_id=rel.predicate_id,
                survived=survived,
                volume_iou=viou,
                gate_frames=tuple(gate_frames),
                recallable={t: bool(survived and viou > t) for t in thresholds},
            )
        )
    return pred_graph, CorruptionLedger(thresholds=thresholds, mask_gate=mask_gate, entries=entries)


# --- scripted scene families used by tests, demos, and the CLI synth docs ---


def lane_script(
    seed: int,
    video_id: str | None = None,
    num_objects: int = 5,
    num_frames: int = 60,
    height: int = 96,
    width: int = 128,
    class_offset: int = 0,
    num_relations: int = 4,
) -> SceneScript:
    """Well-separated objects gliding in disjoint horizontal lanes.

    Motion is slow relative to object size, so frame-to-frame IOU stays high
    and association is unambiguous; objects never overlap.  Classes are
    distinct (offset by ``class_offset``) and every relation gets its own
    predicate, keeping label triples unique within the scene.
    """
    rng = np.random.default_rng(seed)
    lane_height = height // num_objects
    objects = []
    for i in range(num_objects):
        size = int(rng.integers(10, max(11, lane_height - 4)))
        cy = i * lane_height + lane_height // 2
        x0 = int(rng.integers(size, width - size))
        direction = 1 if rng.random() < 0.5 else -1
        drift = int(rng.integers(20, 40)) * direction
        x1 = min(max(size // 2, x0 + drift), width - 1 - size // 2)
        shape: RectShape | DiscShape
        if rng.random() < 0.5:
            shape = RectShape(width=size, height=min(size, lane_height - 2))
        else:
            shape = DiscShape(radius=max(3, min(size // 2, (lane_height - 2) // 2)))
        objects.append(
            ScriptObject(
                object_id=i,
                class_id=class_offset + i,
                shape=shape,
                layer=i,
                waypoints=((0, x0, cy), (num_frames - 1, x1, cy)),
            )
        )
    relations = []
    for r in range(num_relations):
        subject = int(rng.integers(0, num_objects))
        obj = int((subject + 1 + rng.integers(0, num_objects - 1)) % num_objects)
        start = int(rng.integers(0, num_frames // 2))
        end = int(rng.integers(start + num_frames // 4, num_frames)) + 1
        relations.append(
            ScriptRelation(
                subject_id=subject,
                object_id=obj,
                predicate_id=r,
                spans=((start, min(end, num_frames)),),
            )
        )
    return SceneScript(
        video_id=video_id or f"lane-{seed:04d}",
        height=height,
        width=width,
        num_frames=num_frames,
        objects=tuple(objects),
        relations=tuple(relations),
    )


def random_script(
    seed: int,
    video_id: str | None = None,
    max_objects: int = 6,
    max_frames: int = 40,
    height: int = 64,
    width: int = 80,
    num_classes: int = 12,
    num_predicates: int = 8,
) -> SceneScript:
    """Unconstrained random scene: overlaps, occlusion, arbitrary motion."""
    rng = np.random.default_rng(seed)
    num_frames = int(rng.integers(4, max_frames + 1))
    num_objects = int(rng.integers(1, max_objects + 1))
    objects = []
    for i in range(num_objects):
        if rng.random() < 0.5:
            shape: RectShape | DiscShape = RectShape(
                width=int(rng.integers(4, width // 2)),
                height=int(rng.integers(4, height // 2)),
            )
        else:
            shape = DiscShape(radius=int(rng.integers(2, min(height, width) // 4)))
        n_waypoints = int(rng.integers(1, 4))
        frames = sorted(rng.choice(num_frames, size=n_waypoints, replace=False).tolist())
        waypoints = tuple(
            (t, float(rng.integers(0, width)), float(rng.integers(0, height)))
            for t in frames
        )
        objects.append(
            ScriptObject(
                object_id=i,
                class_id=int(rng.integers(0, num_classes)),
                shape=shape,
                layer=i,
                waypoints=waypoints,
            )
        )
    relations = []
    if num_objects >= 2:
        for _ in range(int(rng.integers(0, 5))):
            subject = int(rng.integers(0, num_objects))
            obj = int((subject + 1 + rng.integers(0, num_objects - 1)) % num_objects)
            start = int(rng.integers(0, num_frames))
            end = int(rng.integers(start + 1, num_frames + 1))
            relations.append(
                ScriptRelation(
                    subject_id=subject,
                    object_id=obj,
                    predicate_id=int(rng.integers(0, num_predicates)),
                    spans=((start, end),),
                )
            )
    return SceneScript(
        video_id=video_id or f"rand-{seed:04d}",
        height=height,
        width=width,
        num_frames=num_frames,
        objects=tuple(objects),
        relations=tuple(relations),
    )
