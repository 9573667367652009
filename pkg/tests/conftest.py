"""Shared fixture builders: grids, tubes, and the two-hit golden scene."""
from __future__ import annotations

import numpy as np

from masktubes.core import (
    MaskTube,
    RelationTriplet,
    SceneGraph,
    TimeSpan,
    VideoMeta,
    Vocabulary,
)
from masktubes.rle import encode


def box_grid(h: int, w: int, r0: int, c0: int, r1: int, c1: int) -> np.ndarray:
    grid = np.zeros((h, w), dtype=bool)
    grid[r0:r1, c0:c1] = True
    return grid


def random_grid(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Mixed-texture random grid: bernoulli, blocky, striped, or near-constant."""
    style = rng.integers(0, 4)
    if style == 0:
        return rng.random((h, w)) < rng.uniform(0.05, 0.95)
    if style == 1:
        coarse = rng.random(((h + 3) // 4, (w + 3) // 4)) < rng.uniform(0.2, 0.8)
        return np.repeat(np.repeat(coarse, 4, axis=0), 4, axis=1)[:h, :w]
    if style == 2:
        grid = np.zeros((h, w), dtype=bool)
        grid[:: max(1, int(rng.integers(1, 4)))] = True
        return grid
    return np.full((h, w), bool(rng.integers(0, 2)))


def tube_from_grids(
    entity_id: int, class_id: int, grids: dict[int, np.ndarray], score: float = 1.0
) -> MaskTube:
    return MaskTube(
        entity_id=entity_id,
        class_id=class_id,
        frames={t: encode(g) for t, g in grids.items()},
        score=score,
    )


def small_vocab(num_objects: int = 6, num_predicates: int = 4) -> Vocabulary:
    return Vocabulary.generic(num_objects, num_predicates)


def random_eval_instance(
    rng: np.random.Generator, video_id: str = "fuzz", max_preds: int = 40
) -> tuple[SceneGraph, SceneGraph]:
    """Random GT/prediction graph pair for metric fuzzing.

    Tubes live in a 3x3 slot grid so masks stay pairwise disjoint; prediction
    tubes are per-tube shifted copies (shift 0 keeps IOU 1.0, shift 1 passes
    the 0.5 gate, shift >= 2 fails it), and prediction relations are jittered
    GT spans plus spurious triplets with random scores.
    """
    T, H, W = 24, 30, 30
    num_tubes = int(rng.integers(4, 10))
    gt_tubes, pred_tubes = [], []
    presence = []
    for i in range(num_tubes):
        slot_r, slot_c = divmod(i, 3)
        r0, c0 = slot_r * 10 + 1, slot_c * 10 + 1
        if i == 0:
            start, end = 0, T  # anchor tube, keeps the fallback relation valid
        else:
            start = int(rng.integers(0, T - 6))
            end = int(rng.integers(start + 4, T + 1))
        presence.append((start, end))
        class_id = int(rng.integers(0, 4))
        gt_grids = {t: box_grid(H, W, r0, c0, r0 + 6, c0 + 6) for t in range(start, end)}
        shift = int(rng.integers(0, 4))
        pred_grids = {
            t: box_grid(H, W, r0 + shift, c0, r0 + 6 + shift, c0 + 6)
            for t in range(start, end)
        }
        gt_tubes.append(tube_from_grids(i, class_id, gt_grids))
        pred_tubes.append(tube_from_grids(i, class_id, pred_grids))

    def random_span():
        s = int(rng.integers(0, T - 1))
        e = int(rng.integers(s + 1, T + 1))
        return TimeSpan.from_intervals([(s, e)])

    keys = set()
    gt_relations = []
    for _ in range(int(rng.integers(2, 7))):
        s = int(rng.integers(0, num_tubes))
        o = int((s + 1 + rng.integers(0, num_tubes - 1)) % num_tubes)
        p = int(rng.integers(0, 3))
        if (s, o, p) in keys:
            continue
        # GT spans live inside both tubes' mask presence, as annotations would
        lo = max(presence[s][0], presence[o][0])
        hi = min(presence[s][1], presence[o][1])
        if hi - lo < 1:
            continue
        span_start = int(rng.integers(lo, hi))
        span_end = int(rng.integers(span_start + 1, hi + 1))
        keys.add((s, o, p))
        gt_relations.append(
            RelationTriplet(s, o, p, TimeSpan.from_intervals([(span_start, span_end)]), 1.0)
        )
    if not gt_relations:
        lo, hi = presence[1]
        gt_relations.append(
            RelationTriplet(0, 1, 0, TimeSpan.from_intervals([(lo, hi)]), 1.0)
        )

    def random_score():
        value = float(rng.uniform(0.05, 1.0))
        return round(value, 1) if rng.random() < 0.4 else value  # ties on purpose

    pred_relations = []
    for rel in gt_relations:
        if rng.random() < 0.15:
            continue
        delta = int(rng.integers(-4, 5))
        intervals = [
            (max(0, s + delta), min(T, e + delta)) for s, e in rel.span.intervals
        ]
        intervals = [(s, e) for s, e in intervals if e > s]
        if not intervals:
            continue
        pred_relations.append(
            RelationTriplet(
                rel.subject_id,
                rel.object_id,
                rel.predicate_id,
                TimeSpan.from_intervals(intervals),
                max(0.0, min(1.0, random_score())),
            )
        )
    for _ in range(int(rng.integers(0, max_preds))):
        s = int(rng.integers(0, num_tubes))
        o = int((s + 1 + rng.integers(0, num_tubes - 1)) % num_tubes)
        p = int(rng.integers(0, 3))
        pred_relations.append(
            RelationTriplet(s, o, p, random_span(), max(0.0, min(1.0, random_score())))
        )

    meta = VideoMeta(video_id, T, H, W)
    gt = SceneGraph(meta, tuple(gt_tubes), tuple(gt_relations))
    pred = SceneGraph(meta, tuple(pred_tubes), tuple(pred_relations))
    return gt, pred


def two_hit_fixture() -> tuple[SceneGraph, SceneGraph, Vocabulary]:
    """5-frame scene where exactly frames 1 and 4 pass the 0.5 mask gate.

    Both spans cover all 5 frames, so the prediction's volume IOU against the
    ground truth is exactly 2/5 = 0.4: below the 0.5 time threshold, above 0.1.
    """
    h = w = 16
    vocab = small_vocab()
    gt_subject = box_grid(h, w, 2, 2, 6, 6)
    gt_object = box_grid(h, w, 10, 10, 14, 14)
    # shifted by two rows: IOU vs the ground-truth box is 8/24 = 1/3 < 0.5
    off_subject = box_grid(h, w, 4, 2, 8, 6)
    off_object = box_grid(h, w, 12, 10, 16, 14)

    gt_graph = SceneGraph(
        meta=VideoMeta("golden", 5, h, w),
        tubes=(
            tube_from_grids(1, 0, {t: gt_subject for t in range(5)}),
            tube_from_grids(2, 1, {t: gt_object for t in range(5)}),
        ),
        relations=(
            RelationTriplet(1, 2, 0, TimeSpan.from_intervals([(0, 5)]), 1.0),
        ),
    )
    pred_graph = SceneGraph(
        meta=VideoMeta("golden", 5, h, w),
        tubes=(
            tube_from_grids(
                1, 0, {t: (gt_subject if t in (1, 4) else off_subject) for t in range(5)}
            ),
            tube_from_grids(
                2, 1, {t: (gt_object if t in (1, 4) else off_object) for t in range(5)}
            ),
        ),
        relations=(
            RelationTriplet(1, 2, 0, TimeSpan.from_intervals([(0, 5)]), 0.9),
        ),
    )
    return gt_graph, pred_graph, vocab
