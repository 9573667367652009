"""Dataset documents and bundles: the on-disk interchange contract.

Two JSON documents describe a video.  The scene-graph document holds
geometry, entities, and relations:

    {"video_id", "T", "H", "W", "fps",
     "objects":   [{"id", "class", "is_thing", "score"}],
     "relations": [{"subject", "object", "predicate", "spans": [[s, e], ...],
                    "score"}]}

The mask document holds the per-frame run-length masks:

    {"video_id", "frames": [{"frame", "segments": [{"id", "class",
     "confidence", "rle": [ints], "h", "w"}]}]}

Spans are half-open integer frame pairs.  A bundle is either a directory
(manifest.json plus <video_id>.graph.json / <video_id>.masks.json) or a
single .json file {"vocabulary", "videos": [{"graph", "masks"}]}.  All
emission is deterministic: sorted keys, two-space indent, no timestamps,
shortest round-trip float formatting.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .core import (
    MaskTube,
    RelationTriplet,
    SceneGraph,
    TimeSpan,
    VideoMeta,
    Vocabulary,
)
from .rle import BinaryMask, PanopticFrame, Segment
from .synth import (
    DiscShape,
    NoiseConfig,
    RectShape,
    SceneScript,
    ScriptObject,
    ScriptRelation,
)

_VIDEO_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


class BundleError(ValueError):
    """Unreadable, ill-formed, or inconsistent dataset documents."""


class SchemaError(BundleError):
    """Schema violation at a specific JSON pointer."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


def canonical_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(canonical_dumps(obj), encoding="utf-8")


def load_json(path: str | Path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BundleError(f"{path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleError(f"{path}:{exc.lineno}: {exc.msg}") from None


# --- vocabulary ---


def vocabulary_to_doc(vocab: Vocabulary) -> dict:
    return {
        "objects": [{"name": n, "kind": k} for n, k in vocab.object_classes],
        "predicates": list(vocab.predicate_classes),
    }


def vocabulary_from_doc(doc, pointer: str = "/vocabulary") -> Vocabulary:
    if not isinstance(doc, dict):
        raise SchemaError(pointer, "expected an object")
    try:
        objects = tuple((o["name"], o["kind"]) for o in doc["objects"])
        predicates = tuple(doc["predicates"])
        return Vocabulary(objects, predicates)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(pointer, f"bad vocabulary: {exc}") from None


# --- per-video documents ---


def graph_to_doc(g: SceneGraph, vocab: Vocabulary) -> dict:
    return {
        "video_id": g.meta.video_id,
        "T": g.meta.num_frames,
        "H": g.meta.height,
        "W": g.meta.width,
        "fps": g.meta.fps,
        "objects": [
            {
                "id": tube.entity_id,
                "class": tube.class_id,
                "is_thing": vocab.is_thing(tube.class_id),
                "score": tube.score,
            }
            for tube in g.tubes
        ],
        "relations": [
            {
                "subject": rel.subject_id,
                "object": rel.object_id,
                "predicate": rel.predicate_id,
                "spans": rel.span.to_pairs(),
                "score": rel.score,
            }
            for rel in g.relations
        ],
    }


def masks_to_doc(g: SceneGraph) -> dict:
    by_frame: dict[int, list[dict]] = {}
    for tube in g.tubes:
        for t, mask in tube.frames.items():
            by_frame.setdefault(t, []).append(
                {
                    "id": tube.entity_id,
                    "class": tube.class_id,
                    "confidence": tube.score,
                    "rle": list(mask.runs),
                    "h": mask.height,
                    "w": mask.width,
                }
            )
    return {
        "video_id": g.meta.video_id,
        "frames": [
            {"frame": t, "segments": sorted(by_frame[t], key=lambda s: s["id"])}
            for t in sorted(by_frame)
        ],
    }


def frames_from_doc(doc, source: str = "masks") -> tuple[str, list[PanopticFrame]]:
    """Parse a mask document into panoptic frames."""
    if not isinstance(doc, dict) or "frames" not in doc:
        raise BundleError(f"{source}: expected a mask document with a 'frames' list")
    video_id = str(doc.get("video_id", ""))
    frames = []
    for entry in doc["frames"]:
        try:
            t = int(entry["frame"])
            segments = []
            geometry = None
            for seg in entry["segments"]:
                mask = BinaryMask(int(seg["h"]), int(seg["w"]), tuple(seg["rle"]))
                geometry = (mask.height, mask.width)
                segments.append(
                    Segment(
                        entity_id=int(seg["id"]),
                        class_id=int(seg["class"]),
                        confidence=float(seg.get("confidence", 1.0)),
                        mask=mask,
                    )
                )
            if geometry is None:
                continue  # frames with no segments carry no geometry; skip
            frames.append(PanopticFrame(t, geometry[0], geometry[1], tuple(segments)))
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleError(f"{source}: bad frame entry: {exc}") from None
    frames.sort(key=lambda f: f.frame_index)
    return video_id, frames


def graph_from_docs(graph_doc, masks_doc, vocab: Vocabulary, source: str = "graph") -> SceneGraph:
    """Join a scene-graph document with its mask document."""
    try:
        meta = VideoMeta(
            video_id=str(graph_doc["video_id"]),
            num_frames=int(graph_doc["T"]),
            height=int(graph_doc["H"]),
            width=int(graph_doc["W"]),
            fps=float(graph_doc.get("fps", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"{source}: bad video header: {exc}") from None

    masks: dict[int, dict[int, BinaryMask]] = {}
    seg_class: dict[int, int] = {}
    if masks_doc is not None:
        mask_video_id, _ = _validate_masks_header(masks_doc, source)
        if mask_video_id and mask_video_id != meta.video_id:
            raise BundleError(
                f"{source}: mask document is for video {mask_video_id!r},"
                f" graph is for {meta.video_id!r}"
            )
        for entry in masks_doc["frames"]:
            t = int(entry["frame"])
            for seg in entry["segments"]:
                eid = int(seg["id"])
                try:
                    mask = BinaryMask(int(seg["h"]), int(seg["w"]), tuple(seg["rle"]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise BundleError(f"{source}: bad segment at frame {t}: {exc}") from None
                masks.setdefault(eid, {})[t] = mask
                class_id = int(seg["class"])
                if seg_class.setdefault(eid, class_id) != class_id:
                    raise BundleError(
                        f"{source}: entity {eid} changes class across mask frames"
                    )

    tubes = []
    try:
        for obj in graph_doc["objects"]:
            eid = int(obj["id"])
            class_id = int(obj["class"])
            if eid in seg_class and seg_class[eid] != class_id:
                raise BundleError(
                    f"{source}: entity {eid} has class {class_id} in the graph but"
                    f" {seg_class[eid]} in the mask document"
                )
            if not 0 <= class_id < vocab.num_objects:
                raise BundleError(
                    f"{source}: entity {eid} class {class_id} outside the vocabulary"
                )
            declared_thing = obj.get("is_thing")
            if declared_thing is not None and bool(declared_thing) != vocab.is_thing(class_id):
                raise BundleError(
                    f"{source}: entity {eid} is_thing flag contradicts the vocabulary"
                )
            tubes.append(
                MaskTube(
                    entity_id=eid,
                    class_id=class_id,
                    frames=masks.get(eid, {}),
                    score=float(obj.get("score", 1.0)),
                )
            )
        relations = []
        for rel in graph_doc["relations"]:
            relations.append(
                RelationTriplet(
                    subject_id=int(rel["subject"]),
                    object_id=int(rel["object"]),
                    predicate_id=int(rel["predicate"]),
                    span=TimeSpan.from_intervals([(s, e) for s, e in rel["spans"]]),
                    score=float(rel.get("score", 1.0)),
                )
            )
    except BundleError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"{source}: bad graph document: {exc}") from None
    return SceneGraph(meta=meta, tubes=tuple(tubes), relations=tuple(relations))


def _validate_masks_header(masks_doc, source: str) -> tuple[str, list]:
    if not isinstance(masks_doc, dict) or not isinstance(masks_doc.get("frames"), list):
        raise BundleError(f"{source}: expected a mask document with a 'frames' list")
    return str(masks_doc.get("video_id", "")), masks_doc["frames"]


# --- bundles ---


@dataclass
class VideoRecord:
    graph: SceneGraph
    masks_doc: dict | None = None
    explicit_frames: list[PanopticFrame] | None = None

    def panoptic_frames(self, source: str = "masks") -> list[PanopticFrame]:
        """Strict per-frame view for the tracker; rejects overlapping segments.

        Parsed on demand so that invalid bundles can still be loaded and
        reported by graph validation (violations are data, not load failures).
        """
        if self.explicit_frames is not None:
            return self.explicit_frames
        if self.masks_doc is None:
            return []
        _, frames = frames_from_doc(self.masks_doc, source)
        return frames


@dataclass
class DatasetBundle:
    vocabulary: Vocabulary
    videos: dict[str, VideoRecord]

    def graphs(self) -> dict[str, SceneGraph]:
        return {vid: record.graph for vid, record in self.videos.items()}


def bundle_from_graphs(
    vocab: Vocabulary,
    graphs: Sequence[SceneGraph],
    frames: Mapping[str, list[PanopticFrame]] | None = None,
) -> DatasetBundle:
    videos = {}
    for g in graphs:
        vid = g.meta.video_id
        record = VideoRecord(graph=g, masks_doc=masks_to_doc(g))
        if frames and vid in frames:
            record.explicit_frames = list(frames[vid])
        videos[vid] = record
    return DatasetBundle(vocabulary=vocab, videos=videos)


def save_bundle(bundle: DatasetBundle, path: str | Path) -> None:
    """Write a bundle as a directory, or as one file when ``path`` ends in .json."""
    path = Path(path)
    if path.suffix == ".json":
        doc = {
            "vocabulary": vocabulary_to_doc(bundle.vocabulary),
            "videos": [
                {
                    "graph": graph_to_doc(record.graph, bundle.vocabulary),
                    "masks": masks_to_doc(record.graph),
                }
                for _, record in sorted(bundle.videos.items())
            ],
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        dump_json(doc, path)
        return
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "videos": sorted(bundle.videos),
        "vocabulary": vocabulary_to_doc(bundle.vocabulary),
    }
    dump_json(manifest, path / "manifest.json")
    for vid, record in sorted(bundle.videos.items()):
        if not _VIDEO_ID_RE.match(vid):
            raise BundleError(f"video id {vid!r} is not usable as a file name")
        dump_json(graph_to_doc(record.graph, bundle.vocabulary), path / f"{vid}.graph.json")
        dump_json(masks_to_doc(record.graph), path / f"{vid}.masks.json")


def load_bundle(path: str | Path) -> DatasetBundle:
    """Read a bundle directory or single-file bundle."""
    path = Path(path)
    if path.is_dir():
        manifest = load_json(path / "manifest.json")
        if not isinstance(manifest, dict) or "videos" not in manifest:
            raise BundleError(f"{path / 'manifest.json'}: expected a manifest with 'videos'")
        vocab = vocabulary_from_doc(manifest.get("vocabulary"), "/vocabulary")
        videos = {}
        for vid in manifest["videos"]:
            graph_doc = load_json(path / f"{vid}.graph.json")
            masks_doc = load_json(path / f"{vid}.masks.json")
            graph = graph_from_docs(graph_doc, masks_doc, vocab, source=f"{vid}.graph.json")
            videos[vid] = VideoRecord(graph=graph, masks_doc=masks_doc)
        return DatasetBundle(vocabulary=vocab, videos=videos)

    doc = load_json(path)
    if not isinstance(doc, dict) or "videos" not in doc:
        raise BundleError(f"{path}: expected a bundle with 'vocabulary' and 'videos'")
    vocab = vocabulary_from_doc(doc.get("vocabulary"), "/vocabulary")
    videos = {}
    for i, entry in enumerate(doc["videos"]):
        if not isinstance(entry, dict) or "graph" not in entry:
            raise BundleError(f"{path}: /videos/{i}: expected {{'graph', 'masks'}}")
        graph = graph_from_docs(
            entry["graph"], entry.get("masks"), vocab, source=f"{path}:/videos/{i}"
        )
        videos[graph.meta.video_id] = VideoRecord(graph=graph, masks_doc=entry.get("masks"))
    return DatasetBundle(vocabulary=vocab, videos=videos)


def labels_to_doc(video_id: str, labels) -> dict:
    """Frame-pair relation labels, one entry per (frame, predicted pair)."""
    return {
        "video_id": video_id,
        "labels": [
            {
                "frame": label.frame_index,
                "subject": label.subject_pred_id,
                "object": label.object_pred_id,
                "predicates": sorted(label.predicate_ids),
            }
            for label in labels
        ],
    }


# --- scene scripts and noise configs ---


def _expect(doc, key, pointer, kind=None):
    if not isinstance(doc, dict):
        raise SchemaError(pointer, "expected an object")
    if key not in doc:
        raise SchemaError(f"{pointer}/{key}", "missing required field")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise SchemaError(f"{pointer}/{key}", f"expected {names}")
    return value


def script_from_doc(doc) -> tuple[SceneScript, Vocabulary | None]:
    """Parse a scene-script document; schema errors carry a JSON pointer."""
    pointer = ""
    video_id = str(_expect(doc, "video_id", pointer, str))
    height = int(_expect(doc, "height", pointer, int))
    width = int(_expect(doc, "width", pointer, int))
    num_frames = int(_expect(doc, "num_frames", pointer, int))
    fps = float(doc.get("fps", 5.0))

    objects = []
    raw_objects = _expect(doc, "objects", pointer, list)
    for i, obj in enumerate(raw_objects):
        optr = f"/objects/{i}"
        shape_doc = _expect(obj, "shape", optr, dict)
        kind = _expect(shape_doc, "kind", f"{optr}/shape", str)
        if kind == "rect":
            shape = RectShape(
                width=int(_expect(shape_doc, "width", f"{optr}/shape", int)),
                height=int(_expect(shape_doc, "height", f"{optr}/shape", int)),
            )
        elif kind == "disc":
            shape = DiscShape(radius=int(_expect(shape_doc, "radius", f"{optr}/shape", int)))
        else:
            raise SchemaError(f"{optr}/shape/kind", f"unknown shape kind {kind!r}")
        waypoints = []
        for j, wp in enumerate(_expect(obj, "waypoints", optr, list)):
            if not isinstance(wp, list) or len(wp) != 3:
                raise SchemaError(f"{optr}/waypoints/{j}", "expected [frame, x, y]")
            waypoints.append((int(wp[0]), float(wp[1]), float(wp[2])))
        try:
            objects.append(
                ScriptObject(
                    object_id=int(_expect(obj, "id", optr, int)),
                    class_id=int(_expect(obj, "class", optr, int)),
                    shape=shape,
                    layer=int(_expect(obj, "layer", optr, int)),
                    waypoints=tuple(waypoints),
                )
            )
        except ValueError as exc:
            raise SchemaError(optr, str(exc)) from None

    relations = []
    for i, rel in enumerate(doc.get("relations", [])):
        rptr = f"/relations/{i}"
        spans = []
        for j, span in enumerate(_expect(rel, "spans", rptr, list)):
            if not isinstance(span, list) or len(span) != 2:
                raise SchemaError(f"{rptr}/spans/{j}", "expected [start, end]")
            spans.append((int(span[0]), int(span[1])))
        relations.append(
            ScriptRelation(
                subject_id=int(_expect(rel, "subject", rptr, int)),
                object_id=int(_expect(rel, "object", rptr, int)),
                predicate_id=int(_expect(rel, "predicate", rptr, int)),
                spans=tuple(spans),
            )
        )

    vocab = None
    if "vocabulary" in doc:
        vocab = vocabulary_from_doc(doc["vocabulary"])
    try:
        script = SceneScript(
            video_id=video_id,
            height=height,
            width=width,
            num_frames=num_frames,
            objects=tuple(objects),
            relations=tuple(relations),
            fps=fps,
        )
    except ValueError as exc:
        raise SchemaError("", str(exc)) from None
    return script, vocab


def noise_from_doc(doc) -> NoiseConfig:
    if not isinstance(doc, dict):
        raise SchemaError("", "expected a noise configuration object")
    try:
        return NoiseConfig(
            mask_erode_px=int(doc.get("mask_erode_px", 0)),
            span_clip_frames=int(doc.get("span_clip_frames", 0)),
            drop_triplet_rate=float(doc.get("drop_triplet_rate", 0.0)),
            id_switch_rate=float(doc.get("id_switch_rate", 0.0)),
            seed=int(doc.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError("", f"bad noise configuration: {exc}") from None
