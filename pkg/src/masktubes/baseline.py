"""A non-learned relation predictor: frequency prior + temporal smoothing.

The pipeline mirrors the two-stage shape of learned relation heads without
any trainable parts: rank candidate pairs by co-visibility, score each
co-visible frame from a Laplace-smoothed predicate prior, run the handcrafted
temporal filter, then cut spans at a threshold.  Everything is deterministic
for a fixed corpus and configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    MaskTube,
    RelationTriplet,
    SceneGraph,
    TimeSpan,
    Vocabulary,
    canonicalize_relations,
)

DEFAULT_KERNEL_WEIGHTS = (0.25, 0.5, 1.0, 0.5, 0.25)


@dataclass
class PredicatePrior:
    """Frame-weighted predicate counts per (subject class, object class) pair."""

    num_predicates: int
    laplace_alpha: float = 1.0
    counts: dict[tuple[int, int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_predicates < 1:
            raise ValueError("num_predicates must be >= 1")
        if self.laplace_alpha <= 0:
            raise ValueError("laplace_alpha must be positive")

    def add(self, subject_class: int, object_class: int, predicate_id: int, n: int = 1):
        key = (subject_class, object_class, predicate_id)
        self.counts[key] = self.counts.get(key, 0) + n

    def row(self, subject_class: int, object_class: int) -> np.ndarray:
        """Laplace-smoothed distribution over predicates; always sums to 1."""
        counts = np.zeros(self.num_predicates)
        for r in range(self.num_predicates):
            counts[r] = self.counts.get((subject_class, object_class, r), 0)
        alpha = self.laplace_alpha
        return (counts + alpha) / (counts.sum() + alpha * self.num_predicates)

    def to_dict(self) -> dict:
        return {
            "num_predicates": self.num_predicates,
            "laplace_alpha": self.laplace_alpha,
            "counts": [
                [cs, co, r, n] for (cs, co, r), n in sorted(self.counts.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PredicatePrior":
        prior = cls(
            num_predicates=int(doc["num_predicates"]),
            laplace_alpha=float(doc["laplace_alpha"]),
        )
        for cs, co, r, n in doc["counts"]:
            prior.counts[(int(cs), int(co), int(r))] = int(n)
        return prior


@dataclass(frozen=True)
class SmoothingKernel:
    """Odd-length, center-symmetric, non-negative temporal filter taps."""

    weights: tuple[float, ...] = DEFAULT_KERNEL_WEIGHTS

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if len(weights) % 2 == 0:
            raise ValueError("kernel length must be odd")
        if any(w < 0 for w in weights):
            raise ValueError("kernel weights must be non-negative")
        if weights != weights[::-1]:
            raise ValueError("kernel must be center-symmetric")
        if weights[len(weights) // 2] <= 0:
            raise ValueError("kernel center weight must be positive")

    @property
    def center(self) -> int:
        return len(self.weights) // 2


def fit_prior(
    train_graphs: Sequence[SceneGraph],
    vocab: Vocabulary,
    laplace_alpha: float = 1.0,
) -> PredicatePrior:
    """Accumulate one count per (relation, frame-in-span) over the corpus."""
    prior = PredicatePrior(num_predicates=vocab.num_predicates, laplace_alpha=laplace_alpha)
    for g in train_graphs:
        tubes = g.tube_map()
        for rel in g.relations:
            cs = tubes[rel.subject_id].class_id
            co = tubes[rel.object_id].class_id
            prior.add(cs, co, rel.predicate_id, rel.span.frame_count)
    return prior


def _dilated_box(mask_bbox, height: int, width: int, margin: int):
    r0, c0, r1, c1 = mask_bbox
    return (
        max(0, r0 - margin),
        max(0, c0 - margin),
        min(height, r1 + margin),
        min(width, c1 + margin),
    )


def _box_iou(a, b) -> float:
    rows = min(a[2], b[2]) - max(a[0], b[0])
    cols = min(a[3], b[3]) - max(a[1], b[1])
    if rows <= 0 or cols <= 0:
        return 0.0
    inter = rows * cols
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def pair_proximity(a: MaskTube, b: MaskTube, frames: Sequence[int]) -> float:
    """Mean overlap of dilated bounding boxes across the given frames."""
    if not frames:
        return 0.0
    total = 0.0
    for t in frames:
        mask_a, mask_b = a.frames[t], b.frames[t]
        height, width = mask_a.height, mask_a.width
        margin = max(2, round(0.05 * max(height, width)))
        box_a = _dilated_box(mask_a.bbox(), height, width, margin)
        box_b = _dilated_box(mask_b.bbox(), height, width, margin)
        total += _box_iou(box_a, box_b)
    return total / len(frames)


def select_pairs(
    tubes: Sequence[MaskTube], budget: int
) -> list[tuple[int, int]]:
    """Top ordered (subject, object) entity pairs by co-visibility.

    Co-visibility counts frames where both tubes have non-empty masks; ties
    break on mean dilated-box overlap (closer pairs first), then on ids.
    Pairs that never co-occur are excluded regardless of budget.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    visible = {tube.entity_id: tube.visible_frames() for tube in tubes}
    by_id = {tube.entity_id: tube for tube in tubes}
    scored = []
    for a in tubes:
        for b in tubes:
            if a.entity_id == b.entity_id:
                continue
            common = sorted(visible[a.entity_id] & visible[b.entity_id])
            if not common:
                continue
            proximity = pair_proximity(by_id[a.entity_id], by_id[b.entity_id], common)
            scored.append(
                (-len(common), -proximity, a.entity_id, b.entity_id)
            )
    scored.sort()
    return [(s, o) for _, _, s, o in scored[:budget]]


def score_frames(
    subject: MaskTube,
    obj: MaskTube,
    prior: PredicatePrior,
    num_frames: int,
) -> np.ndarray:
    """Per-frame per-predicate scores: the prior row on co-visible frames, else 0."""
    scores = np.zeros((num_frames, prior.num_predicates))
    common = subject.visible_frames() & obj.visible_frames()
    if common:
        row = prior.row(subject.class_id, obj.class_id)
        for t in common:
            scores[t] = row
    return scores


def smooth(
    series: np.ndarray,
    kernel: SmoothingKernel | None = None,
    boundary: str = "renormalize",
) -> np.ndarray:
    """Temporal filtering along axis 0 with the handcrafted kernel.

    ``renormalize`` divides by the sum of in-range taps, so constant series
    (and in particular every interior frame of one) map to themselves;
    ``zero`` pads with zeros and divides by the full tap sum everywhere.
    """
    kernel = kernel or SmoothingKernel()
    if boundary not in ("renormalize", "zero"):
        raise ValueError(f"unknown boundary mode {boundary!r}")
    x = np.asarray(series, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.shape[0] < 1:
        raise ValueError("series must have at least one frame")
    w = np.asarray(kernel.weights)
    c = kernel.center
    # zero-pad by the half-width so every output frame has a full window;
    # (np.convolve's "same" mode is unusable: it returns max(len(x), len(w)))
    padded = np.pad(x, ((c, c), (0, 0)))
    num = np.empty_like(x)
    for col in range(x.shape[1]):
        num[:, col] = np.convolve(padded[:, col], w, mode="valid")
    if boundary == "renormalize":
        den = np.convolve(np.pad(np.ones(x.shape[0]), c), w, mode="valid")
    else:
        den = np.full(x.shape[0], w.sum())
    out = num / den[:, None]
    return out[:, 0] if squeeze else out


def extract_triplets(
    smoothed: np.ndarray,
    theta: float,
    subject_id: int,
    object_id: int,
) -> list[RelationTriplet]:
    """Cut per-predicate spans at ``theta``; triplet score is the span mean."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must be in (0,1), got {theta}")
    scores = np.asarray(smoothed, dtype=float)
    if scores.ndim != 2:
        raise ValueError("expected a (frames, predicates) score array")
    out = []
    for r in range(scores.shape[1]):
        frames = np.flatnonzero(scores[:, r] >= theta)
        if frames.size == 0:
            continue
        span = TimeSpan.from_frames(frames.tolist())
        out.append(
            RelationTriplet(
                subject_id=subject_id,
                object_id=object_id,
                predicate_id=r,
                span=span,
                score=float(scores[frames, r].mean()),
            )
        )
    return out


def predict_relations(
    tubes: Sequence[MaskTube],
    num_frames: int,
    prior: PredicatePrior,
    budget: int = 100,
    theta: float = 0.3,
    kernel: SmoothingKernel | None = None,
    boundary: str = "renormalize",
) -> list[RelationTriplet]:
    """End-to-end baseline: pair selection, scoring, smoothing, span extraction.

    Smoothed scores are zeroed outside each pair's co-visible frames before
    extraction: the filter spreads mass past span edges, but a relation is
    only ever asserted where both entities are visible.
    """
    kernel = kernel or SmoothingKernel()
    by_id = {tube.entity_id: tube for tube in tubes}
    relations: list[RelationTriplet] = []
    for subject_id, object_id in select_pairs(tubes, budget):
        subject, obj = by_id[subject_id], by_id[object_id]
        scores = score_frames(subject, obj, prior, num_frames)
        smoothed = smooth(scores, kernel, boundary)
        support = np.zeros(num_frames, dtype=bool)
        for t in subject.visible_frames() & obj.visible_frames():
            support[t] = True
        smoothed[~support] = 0.0
        relations.extend(extract_triplets(smoothed, theta, subject_id, object_id))
    return canonicalize_relations(relations)
