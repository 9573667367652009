"""Run-length codec for binary masks, plus mask algebra computed on runs.

A mask is stored as alternating background/foreground run counts over
row-major pixel order, always beginning with a background count (which may
be zero).  The canonical form forbids any other zero-length run, so every
bit grid has exactly one encoding.  On disk the runs are a plain JSON
integer array: bit-exact, diff-friendly, language-neutral.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MaskError(ValueError):
    """Malformed mask data or mismatched mask geometry."""


@dataclass(frozen=True)
class BinaryMask:
    """A single-frame binary mask in canonical run-length form."""

    height: int
    width: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise MaskError(f"mask geometry must be positive, got {self.height}x{self.width}")
        runs = tuple(int(r) for r in self.runs)
        object.__setattr__(self, "runs", runs)
        if not runs:
            raise MaskError("runs may not be empty")
        if any(r < 0 for r in runs):
            raise MaskError("runs must be non-negative")
        if any(r == 0 for r in runs[1:]):
            raise MaskError("only the leading background run may be zero")
        total = sum(runs)
        if total != self.height * self.width:
            raise MaskError(f"runs cover {total} pixels, expected {self.height * self.width}")

    @property
    def area(self) -> int:
        """Foreground pixel count."""
        return sum(self.runs[1::2])

    @property
    def is_empty(self) -> bool:
        return self.area == 0

    def intervals(self) -> list[tuple[int, int]]:
        """Foreground spans [start, end) in flat row-major pixel order."""
        out = []
        pos = 0
        foreground = False
        for run in self.runs:
            if foreground and run:
                out.append((pos, pos + run))
            pos += run
            foreground = not foreground
        return out

    def bbox(self) -> tuple[int, int, int, int] | None:
        """Tight bounding box (row0, col0, row1, col1), half-open; None if empty."""
        spans = self.intervals()
        if not spans:
            return None
        w = self.width
        row0 = spans[0][0] // w
        row1 = (spans[-1][1] - 1) // w + 1
        col0, col1 = w, 0
        for start, end in spans:
            first_row = start // w
            last_row = (end - 1) // w
            if last_row > first_row:
                # a span crossing a row boundary touches both canvas edges
                col0, col1 = 0, w
            else:
                col0 = min(col0, start % w)
                col1 = max(col1, (end - 1) % w + 1)
        return (row0, col0, row1, col1)


def encode(grid, height: int | None = None, width: int | None = None) -> BinaryMask:
    """Encode a row-major bit grid; ``decode(encode(x))`` is bit-exact."""
    arr = np.asarray(grid)
    if arr.ndim != 2:
        raise MaskError(f"expected a 2-D grid, got {arr.ndim} dimension(s)")
    h, w = arr.shape
    if height is not None and height != h:
        raise MaskError(f"grid has {h} rows, expected {height}")
    if width is not None and width != w:
        raise MaskError(f"grid has {w} columns, expected {width}")
    flat = arr.reshape(-1).astype(bool)
    if flat.size == 0:
        raise MaskError("grid may not be empty")
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return BinaryMask(h, w, tuple(int(r) for r in runs))


def decode(mask: BinaryMask) -> np.ndarray:
    """Exact inverse of :func:`encode`; returns a bool grid of shape (H, W)."""
    values = np.zeros(len(mask.runs), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, mask.runs)
    return flat.reshape(mask.height, mask.width)


def _require_same_geometry(a: BinaryMask, b: BinaryMask) -> None:
    if a.height != b.height or a.width != b.width:
        raise MaskError(
            f"mask geometry mismatch: {a.height}x{a.width} vs {b.height}x{b.width}"
        )


def intersection_area(a: BinaryMask, b: BinaryMask) -> int:
    """|a AND b| by a linear walk over foreground runs, no decompression."""
    _require_same_geometry(a, b)
    spans_a = a.intervals()
    spans_b = b.intervals()
    i = j = 0
    total = 0
    while i < len(spans_a) and j < len(spans_b):
        lo = max(spans_a[i][0], spans_b[j][0])
        hi = min(spans_a[i][1], spans_b[j][1])
        if hi > lo:
            total += hi - lo
        if spans_a[i][1] <= spans_b[j][1]:
            i += 1
        else:
            j += 1
    return total


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two masks; 0.0 when both are empty."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def from_intervals(height: int, width: int, spans) -> BinaryMask:
    """Build a canonical mask from disjoint sorted foreground spans."""
    runs = []
    pos = 0
    for start, end in spans:
        if start < pos or end <= start or end > height * width:
            raise MaskError(f"bad foreground span ({start}, {end}) at pixel {pos}")
        runs.append(start - pos)
        runs.append(end - start)
        pos = end
    if not runs:
        return BinaryMask(height, width, (height * width,))
    if pos < height * width:
        runs.append(height * width - pos)
    return BinaryMask(height, width, tuple(runs))


def mask_union(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Foreground union of two masks, computed on runs."""
    _require_same_geometry(a, b)
    spans = sorted(a.intervals() + b.intervals())
    merged: list[list[int]] = []
    for start, end in spans:
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return from_intervals(a.height, a.width, [(s, e) for s, e in merged])


@dataclass(frozen=True)
class Segment:
    """One panoptic segment of a frame."""

    entity_id: int
    class_id: int
    confidence: float
    mask: BinaryMask

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise MaskError(f"confidence must be in [0,1], got {self.confidence}")


@dataclass(frozen=True)
class PanopticFrame:
    """Per-frame panoptic decomposition: pairwise-disjoint segment masks."""

    frame_index: int
    height: int
    width: int
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.frame_index < 0:
            raise MaskError(f"frame_index must be non-negative, got {self.frame_index}")
        spans = []
        for seg in self.segments:
            if seg.mask.height != self.height or seg.mask.width != self.width:
                raise MaskError(
                    f"segment {seg.entity_id} geometry {seg.mask.height}x{seg.mask.width}"
                    f" differs from frame {self.height}x{self.width}"
                )
            spans.extend(seg.mask.intervals())
        spans.sort()
        reach = 0
        for start, end in spans:
            if start < reach:
                raise MaskError(f"segments overlap at frame {self.frame_index}")
            reach = end
