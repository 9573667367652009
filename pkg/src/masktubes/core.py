"""Domain types, validation, and canonicalization for video scene graphs.

A scene graph couples tracked mask tubes (one per entity, things and stuff
alike) with relation triplets over scattered time spans.  All types here are
immutable after construction and all operations are pure, so graphs can be
shared across threads and evaluated in parallel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .rle import BinaryMask, intersection_area

THING = "thing"
STUFF = "stuff"


@dataclass(frozen=True)
class Vocabulary:
    """Ordered object and predicate class lists; class id = list position."""

    object_classes: tuple[tuple[str, str], ...]
    predicate_classes: tuple[str, ...]

    def __post_init__(self):
        objects = tuple((str(n), str(k)) for n, k in self.object_classes)
        predicates = tuple(str(p) for p in self.predicate_classes)
        object.__setattr__(self, "object_classes", objects)
        object.__setattr__(self, "predicate_classes", predicates)
        names = [n for n, _ in objects]
        if len(set(names)) != len(names):
            raise ValueError("object class names must be unique")
        if len(set(predicates)) != len(predicates):
            raise ValueError("predicate class names must be unique")
        for name, kind in objects:
            if kind not in (THING, STUFF):
                raise ValueError(f"object class {name!r} has unknown kind {kind!r}")

    @property
    def num_objects(self) -> int:
        return len(self.object_classes)

    @property
    def num_predicates(self) -> int:
        return len(self.predicate_classes)

    def is_thing(self, class_id: int) -> bool:
        return self.object_classes[class_id][1] == THING

    def stuff_class_ids(self) -> frozenset[int]:
        return frozenset(
            i for i, (_, kind) in enumerate(self.object_classes) if kind == STUFF
        )

    @classmethod
    def generic(
        cls,
        num_objects: int = 126,
        num_predicates: int = 57,
        stuff: Iterable[int] = (),
    ) -> "Vocabulary":
        """Placeholder vocabulary with synthetic names (default sizes 126/57)."""
        stuff_ids = set(stuff)
        objects = tuple(
            (f"object_{i:03d}", STUFF if i in stuff_ids else THING)
            for i in range(num_objects)
        )
        predicates = tuple(f"predicate_{i:03d}" for i in range(num_predicates))
        return cls(objects, predicates)


@dataclass(frozen=True)
class VideoMeta:
    """Video geometry; pixel content is never stored, only shape."""

    video_id: str
    num_frames: int
    height: int
    width: int
    fps: float = 0.0

    def __post_init__(self):
        if self.num_frames < 1:
            raise ValueError(f"num_frames must be >= 1, got {self.num_frames}")
        if self.height < 1 or self.width < 1:
            raise ValueError(f"geometry must be positive, got {self.height}x{self.width}")


@dataclass(frozen=True)
class TimeSpan:
    """A scattered time span: disjoint, sorted, non-adjacent [start, end) frame ranges."""

    intervals: tuple[tuple[int, int], ...]

    def __post_init__(self):
        intervals = tuple((int(s), int(e)) for s, e in self.intervals)
        object.__setattr__(self, "intervals", intervals)
        if not intervals:
            raise ValueError("a time span must contain at least one frame")
        prev_end = None
        for start, end in intervals:
            if start < 0 or end <= start:
                raise ValueError(f"bad interval [{start}, {end})")
            if prev_end is not None and start <= prev_end:
                raise ValueError("intervals must be sorted, disjoint, and non-adjacent")
            prev_end = end

    @classmethod
    def from_intervals(cls, intervals: Iterable[tuple[int, int]]) -> "TimeSpan":
        """Normalize arbitrary intervals: sort, merge overlaps and adjacency."""
        pairs = sorted((int(s), int(e)) for s, e in intervals)
        merged: list[list[int]] = []
        for start, end in pairs:
            if end <= start:
                raise ValueError(f"bad interval [{start}, {end})")
            if merged and start <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], end)
            else:
                merged.append([start, end])
        return cls(tuple((s, e) for s, e in merged))

    @classmethod
    def from_frames(cls, frames: Iterable[int]) -> "TimeSpan":
        ordered = sorted(set(int(t) for t in frames))
        if not ordered:
            raise ValueError("a time span must contain at least one frame")
        intervals = []
        start = prev = ordered[0]
        for t in ordered[1:]:
            if t == prev + 1:
                prev = t
                continue
            intervals.append((start, prev + 1))
            start = prev = t
        intervals.append((start, prev + 1))
        return cls(tuple(intervals))

    @property
    def frame_count(self) -> int:
        return sum(e - s for s, e in self.intervals)

    @property
    def first_frame(self) -> int:
        return self.intervals[0][0]

    @property
    def last_frame(self) -> int:
        return self.intervals[-1][1] - 1

    def frames(self) -> list[int]:
        return [t for s, e in self.intervals for t in range(s, e)]

    def __contains__(self, t: int) -> bool:
        return any(s <= t < e for s, e in self.intervals)

    def union(self, other: "TimeSpan") -> "TimeSpan":
        return TimeSpan.from_intervals(self.intervals + other.intervals)

    def union_frame_count(self, other: "TimeSpan") -> int:
        return self.union(other).frame_count

    def common_frames(self, other: "TimeSpan") -> list[int]:
        """Frames present in both spans, ascending."""
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            out.extend(range(lo, hi))
            if a[i][1] <= b[j][1]:
                i += 1
            else:
                j += 1
        return out

    def to_pairs(self) -> list[list[int]]:
        return [[s, e] for s, e in self.intervals]


@dataclass(frozen=True)
class MaskTube:
    """One entity's tracked masks across frames, with class label and score."""

    entity_id: int
    class_id: int
    frames: Mapping[int, BinaryMask]
    score: float = 1.0

    def __post_init__(self):
        frames = {int(t): m for t, m in self.frames.items()}
        object.__setattr__(self, "frames", frames)
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0,1], got {self.score}")
        geometry = None
        for t, mask in frames.items():
            if t < 0:
                raise ValueError(f"tube {self.entity_id}: negative frame index {t}")
            if geometry is None:
                geometry = (mask.height, mask.width)
            elif (mask.height, mask.width) != geometry:
                raise ValueError(f"tube {self.entity_id}: inconsistent mask geometry")

    def mask_at(self, t: int) -> BinaryMask | None:
        return self.frames.get(t)

    def frame_indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.frames))

    def visible_frames(self) -> frozenset[int]:
        """Frames where the tube has a non-empty mask."""
        return frozenset(t for t, m in self.frames.items() if not m.is_empty)

    def geometry(self) -> tuple[int, int] | None:
        for mask in self.frames.values():
            return (mask.height, mask.width)
        return None


@dataclass(frozen=True)
class RelationTriplet:
    """(subject, object, predicate) grounded by a scattered time span."""

    subject_id: int
    object_id: int
    predicate_id: int
    span: TimeSpan
    score: float = 1.0

    def __post_init__(self):
        if self.subject_id == self.object_id:
            raise ValueError(f"subject and object must differ, both {self.subject_id}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0,1], got {self.score}")

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.subject_id, self.object_id, self.predicate_id)


@dataclass(frozen=True)
class SceneGraph:
    """Video-level container: geometry, mask tubes, relation triplets."""

    meta: VideoMeta
    tubes: tuple[MaskTube, ...]
    relations: tuple[RelationTriplet, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tubes", tuple(self.tubes))
        object.__setattr__(self, "relations", tuple(self.relations))

    def tube(self, entity_id: int) -> MaskTube:
        for tube in self.tubes:
            if tube.entity_id == entity_id:
                return tube
        raise KeyError(f"no tube with entity_id {entity_id}")

    def tube_map(self) -> dict[int, MaskTube]:
        return {tube.entity_id: tube for tube in self.tubes}


@dataclass(frozen=True)
class Violation:
    """One violated graph invariant; violations are data, not failures."""

    kind: str
    message: str
    frame: int | None = None
    entities: tuple[int, ...] = ()

    def __str__(self) -> str:
        parts = [self.kind]
        if self.frame is not None:
            parts.append(f"frame={self.frame}")
        if self.entities:
            parts.append("entities=" + ",".join(str(e) for e in self.entities))
        parts.append(self.message)
        return " ".join(parts)


def validate_scene_graph(g: SceneGraph, vocab: Vocabulary) -> list[Violation]:
    """Collect every violated invariant of ``g``; empty list iff valid."""
    violations: list[Violation] = []
    meta = g.meta

    seen_ids: set[int] = set()
    for tube in g.tubes:
        if tube.entity_id in seen_ids:
            violations.append(
                Violation(
                    "duplicate_entity",
                    f"entity_id {tube.entity_id} appears more than once",
                    entities=(tube.entity_id,),
                )
            )
        seen_ids.add(tube.entity_id)
        if not 0 <= tube.class_id < vocab.num_objects:
            violations.append(
                Violation(
                    "class_out_of_range",
                    f"tube {tube.entity_id} has class_id {tube.class_id},"
                    f" vocabulary holds {vocab.num_objects} object classes",
                    entities=(tube.entity_id,),
                )
            )
        for t, mask in sorted(tube.frames.items()):
            if not 0 <= t < meta.num_frames:
                violations.append(
                    Violation(
                        "frame_out_of_range",
                        f"tube {tube.entity_id} has a mask at frame {t},"
                        f" video has {meta.num_frames} frames",
                        frame=t,
                        entities=(tube.entity_id,),
                    )
                )
            if (mask.height, mask.width) != (meta.height, meta.width):
                violations.append(
                    Violation(
                        "geometry_mismatch",
                        f"tube {tube.entity_id} frame {t} mask is"
                        f" {mask.height}x{mask.width}, video is {meta.height}x{meta.width}",
                        frame=t,
                        entities=(tube.entity_id,),
                    )
                )

    entity_ids = {tube.entity_id for tube in g.tubes}
    for rel in g.relations:
        for endpoint in (rel.subject_id, rel.object_id):
            if endpoint not in entity_ids:
                violations.append(
                    Violation(
                        "dangling_relation",
                        f"relation ({rel.subject_id},{rel.object_id},{rel.predicate_id})"
                        f" references missing entity {endpoint}",
                        entities=(endpoint,),
                    )
                )
        if not 0 <= rel.predicate_id < vocab.num_predicates:
            violations.append(
                Violation(
                    "class_out_of_range",
                    f"relation ({rel.subject_id},{rel.object_id}) has predicate_id"
                    f" {rel.predicate_id}, vocabulary holds {vocab.num_predicates} predicates",
                    entities=(rel.subject_id, rel.object_id),
                )
            )
        if rel.span.first_frame < 0 or rel.span.last_frame >= meta.num_frames:
            violations.append(
                Violation(
                    "frame_out_of_range",
                    f"relation ({rel.subject_id},{rel.object_id},{rel.predicate_id})"
                    f" span exceeds [0, {meta.num_frames})",
                    entities=(rel.subject_id, rel.object_id),
                )
            )

    # per-frame non-overlap across tubes
    by_frame: dict[int, list[tuple[int, BinaryMask]]] = {}
    for tube in g.tubes:
        for t, mask in tube.frames.items():
            by_frame.setdefault(t, []).append((tube.entity_id, mask))
    for t in sorted(by_frame):
        entries = by_frame[t]
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                id_a, mask_a = entries[i]
                id_b, mask_b = entries[j]
                if (mask_a.height, mask_a.width) != (mask_b.height, mask_b.width):
                    continue  # already reported as geometry_mismatch
                if intersection_area(mask_a, mask_b) > 0:
                    violations.append(
                        Violation(
                            "mask_overlap",
                            f"tubes {id_a} and {id_b} overlap at frame {t}",
                            frame=t,
                            entities=(id_a, id_b),
                        )
                    )
    return violations


def canonicalize_relations(
    relations: Sequence[RelationTriplet],
) -> list[RelationTriplet]:
    """Merge triplets sharing (subject, object, predicate) into one scattered span.

    The merged span is the normalized union of the inputs' spans, the score is
    the maximum of the merged scores, and the output is sorted by key.  A video
    therefore carries each relation at most once, however often it stops and
    resumes.  Idempotent.
    """
    grouped: dict[tuple[int, int, int], list[RelationTriplet]] = {}
    for rel in relations:
        grouped.setdefault(rel.key, []).append(rel)
    out = []
    for key in sorted(grouped):
        members = grouped[key]
        intervals: list[tuple[int, int]] = []
        for rel in members:
            intervals.extend(rel.span.intervals)
        out.append(
            RelationTriplet(
                subject_id=key[0],
                object_id=key[1],
                predicate_id=key[2],
                span=TimeSpan.from_intervals(intervals),
                score=max(rel.score for rel in members),
            )
        )
    return out
