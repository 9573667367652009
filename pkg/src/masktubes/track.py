"""IOU tracker: per-frame panoptic segments in, tracked mask tubes out.

Association is mask-IOU against each track's last seen mask, solved per frame
as a minimum-cost assignment.  No motion model and no appearance features, so
runs are exactly reproducible.  Stuff classes can bypass association entirely
and accumulate into one tube per class.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import MaskTube, Vocabulary
from .rle import BinaryMask, MaskError, PanopticFrame, mask_iou, mask_union

# cost assigned to gated-out (track, segment) pairs; any total of real costs
# (each in [0, 1]) stays far below a single forbidden entry
FORBIDDEN_COST = 1.0e6


def hungarian(cost: Sequence[Sequence[float]]) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment over a rectangular cost matrix.

    Returns min(rows, cols) (row, col) pairs sorted by row.  Deterministic:
    rows are processed in order and ties fall to the lowest column index.
    """
    matrix = [list(map(float, row)) for row in cost]
    n_rows = len(matrix)
    n_cols = len(matrix[0]) if n_rows else 0
    if n_rows == 0 or n_cols == 0:
        return []
    for row in matrix:
        if len(row) != n_cols:
            raise ValueError("cost matrix rows must have equal length")
        for value in row:
            if value != value or value in (float("inf"), float("-inf")):
                raise ValueError("cost entries must be finite")

    transposed = n_rows > n_cols
    if transposed:
        matrix = [[matrix[r][c] for r in range(n_rows)] for c in range(n_cols)]
        n_rows, n_cols = n_cols, n_rows

    INF = float("inf")
    u = [0.0] * (n_rows + 1)
    v = [0.0] * (n_cols + 1)
    match = [0] * (n_cols + 1)  # column -> 1-based row, 0 = unmatched
    way = [0] * (n_cols + 1)
    for i in range(1, n_rows + 1):
        match[0] = i
        j0 = 0
        minv = [INF] * (n_cols + 1)
        used = [False] * (n_cols + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = INF
            j1 = 0
            row = matrix[i0 - 1]
            for j in range(1, n_cols + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n_cols + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    pairs = [(match[j] - 1, j - 1) for j in range(1, n_cols + 1) if match[j] != 0]
    if transposed:
        pairs = [(c, r) for r, c in pairs]
    return sorted(pairs)


@dataclass(frozen=True)
class TrackerConfig:
    iou_gate: float = 0.3
    max_age: int = 10
    stuff_by_class: bool = True

    def __post_init__(self):
        if not 0.0 < self.iou_gate <= 1.0:
            raise ValueError(f"iou_gate must be in (0,1], got {self.iou_gate}")
        if self.max_age < 0:
            raise ValueError(f"max_age must be >= 0, got {self.max_age}")


@dataclass
class TrackState:
    """Mutable per-track accumulator owned by a single tracking fold."""

    track_id: int
    class_id: int
    frames: dict[int, BinaryMask] = field(default_factory=dict)
    last_seen: int = -1
    confidence_total: float = 0.0
    confidence_count: int = 0
    retired: bool = False
    is_stuff: bool = False

    @property
    def last_mask(self) -> BinaryMask:
        return self.frames[self.last_seen]

    @property
    def confidence(self) -> float:
        if self.confidence_count == 0:
            return 0.0
        return self.confidence_total / self.confidence_count

    def absorb(self, t: int, mask: BinaryMask, confidence: float) -> None:
        if t in self.frames:
            mask = mask_union(self.frames[t], mask)
        self.frames[t] = mask
        self.last_seen = max(self.last_seen, t)
        self.confidence_total += confidence
        self.confidence_count += 1

    def to_tube(self) -> MaskTube:
        return MaskTube(
            entity_id=self.track_id,
            class_id=self.class_id,
            frames=dict(self.frames),
            score=self.confidence,
        )


def _check_geometry(tracks: Sequence[TrackState], frame: PanopticFrame) -> None:
    for track in tracks:
        if track.frames:
            mask = track.last_mask
            if (mask.height, mask.width) != (frame.height, frame.width):
                raise MaskError(
                    f"frame {frame.frame_index} geometry {frame.height}x{frame.width}"
                    f" differs from tracker geometry {mask.height}x{mask.width}"
                )
            return


def associate_step(
    tracks: Iterable[TrackState],
    frame: PanopticFrame,
    cfg: TrackerConfig,
    stuff_class_ids: frozenset[int] = frozenset(),
) -> list[TrackState]:
    """Advance all tracks by one frame; returns the updated track list.

    Tracks unmatched for more than ``max_age`` frames are flagged retired and
    stop competing for segments but stay in the list (scattered spans permit
    tubes with gaps, so retired tracks are emitted, never deleted).
    """
    tracks = list(tracks)
    _check_geometry(tracks, frame)
    t = frame.frame_index
    next_id = max((trk.track_id for trk in tracks), default=-1) + 1

    for track in tracks:
        if track.retired or track.is_stuff:
            continue
        # a track survives up to max_age consecutive unmatched frames
        if t - track.last_seen - 1 > cfg.max_age:
            track.retired = True

    stuff_segments = []
    assignable = []
    for segment in frame.segments:
        if cfg.stuff_by_class and segment.class_id in stuff_class_ids:
            stuff_segments.append(segment)
        else:
            assignable.append(segment)

    candidates = [trk for trk in tracks if not trk.retired and not trk.is_stuff]
    if candidates and assignable:
        cost = []
        for track in candidates:
            row = []
            for segment in assignable:
                if track.class_id != segment.class_id:
                    row.append(FORBIDDEN_COST)
                    continue
                iou = mask_iou(track.last_mask, segment.mask)
                row.append(1.0 - iou if iou >= cfg.iou_gate else FORBIDDEN_COST)
            cost.append(row)
        matched_segments = set()
        for row, col in hungarian(cost):
            if cost[row][col] >= FORBIDDEN_COST:
                continue
            segment = assignable[col]
            candidates[row].absorb(t, segment.mask, segment.confidence)
            matched_segments.add(col)
    else:
        matched_segments = set()

    for col, segment in enumerate(assignable):
        if col in matched_segments:
            continue
        track = TrackState(track_id=next_id, class_id=segment.class_id)
        track.absorb(t, segment.mask, segment.confidence)
        tracks.append(track)
        next_id += 1

    for segment in stuff_segments:
        merged = None
        for track in tracks:
            if track.is_stuff and track.class_id == segment.class_id:
                merged = track
                break
        if merged is None:
            merged = TrackState(
                track_id=next_id, class_id=segment.class_id, is_stuff=True
            )
            tracks.append(merged)
            next_id += 1
        merged.absorb(t, segment.mask, segment.confidence)

    return tracks


def build_tubes(
    frames: Sequence[PanopticFrame],
    cfg: TrackerConfig | None = None,
    vocabulary: Vocabulary | None = None,
) -> list[MaskTube]:
    """Fold :func:`associate_step` over an ordered frame sequence.

    Emits every track, live and retired, as a MaskTube with score equal to the
    running mean of absorbed segment confidences.  Deterministic for a fixed
    input and config, including track id assignment order.
    """
    cfg = cfg or TrackerConfig()
    stuff_ids = vocabulary.stuff_class_ids() if vocabulary is not None else frozenset()
    tracks: list[TrackState] = []
    prev_index = None
    for frame in frames:
        if prev_index is not None and frame.frame_index <= prev_index:
            raise ValueError(
                f"frames must be ordered by frame_index, got {frame.frame_index}"
                f" after {prev_index}"
            )
        prev_index = frame.frame_index
        tracks = associate_step(tracks, frame, cfg, stuff_ids)
    return [trk.to_tube() for trk in sorted(tracks, key=lambda trk: trk.track_id)]
