"""Command-line surface: validate, eval, track, synth, baseline, rle.

Exit codes: 0 success, 1 validation failure, 2 parse/config error.  All file
emissions are deterministic; re-running a command with identical inputs
produces byte-identical outputs.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from .baseline import PredicatePrior, fit_prior, predict_relations
from .core import SceneGraph, VideoMeta, Vocabulary, validate_scene_graph
from .metrics import EvalConfig, EvalReport, evaluate
from .rle import BinaryMask, MaskError, decode, encode
from .synth import generate, perturb, NoiseConfig
from .track import TrackerConfig, build_tubes

PARSE_ERROR = 2
VALIDATION_ERROR = 1


def _workers(args) -> int | None:
    if getattr(args, "workers", None):
        return args.workers
    env = os.environ.get("MASKTUBES_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise mio.BundleError(f"MASKTUBES_WORKERS={env!r} is not an integer")
    return os.cpu_count()


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part)


def cmd_validate(args) -> int:
    failed = False
    for path in args.paths:
        bundle = mio.load_bundle(path)
        for vid in sorted(bundle.videos):
            graph = bundle.videos[vid].graph
            for violation in validate_scene_graph(graph, bundle.vocabulary):
                failed = True
                print(f"{vid}\t{violation}")
    return VALIDATION_ERROR if failed else 0


def format_report_grid(report: EvalReport, label: str = "pred") -> str:
    """Human-readable grid: one row per method, R/mR per (threshold, K) cell."""
    cfg = report.config
    header1 = f"{'Method':<16}"
    header2 = f"{'':<16}"
    for thr in cfg.vol_thresholds:
        block = [f"R/mR@{k}" for k in cfg.k_values]
        width = max(15, *(len(b) + 9 for b in block))
        header1 += f"thre={thr:g}".ljust(width * len(block))
        header2 += "".join(b.ljust(width) for b in block)
    row = f"{label:<16}"
    for thr in cfg.vol_thresholds:
        for k in cfg.k_values:
            cell = report.cells[(k, thr)]
            text = f"{100 * cell.recall:.2f}/{100 * cell.mean_recall:.2f}"
            width = max(15, len(f"R/mR@{k}") + 9)
            row += text.ljust(width)
    return "\n".join([header1.rstrip(), header2.rstrip(), row.rstrip()])


def cmd_eval(args) -> int:
    gt_bundle = mio.load_bundle(args.gt)
    pred_bundle = mio.load_bundle(args.pred)
    if gt_bundle.vocabulary != pred_bundle.vocabulary:
        raise mio.BundleError(
            "vocabulary mismatch between ground-truth and prediction bundles"
        )
    cfg = EvalConfig(
        k_values=args.k,
        vol_thresholds=args.thresholds,
        mask_gate=args.gate,
        corpus_wide_k=args.corpus_wide_k,
    )
    report = evaluate(gt_bundle.graphs(), pred_bundle.graphs(), cfg, workers=_workers(args))
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.out:
        mio.dump_json(report.to_dict(), args.out)
    print(format_report_grid(report, label=Path(args.pred).stem or "pred"))
    return 0


def _tracker_vocabulary(frames, explicit: Vocabulary | None) -> Vocabulary:
    if explicit is not None:
        return explicit
    max_class = -1
    for frame in frames:
        for segment in frame.segments:
            max_class = max(max_class, segment.class_id)
    if max_class < 126:
        return Vocabulary.generic()
    return Vocabulary.generic(num_objects=max_class + 1)


def cmd_track(args) -> int:
    source = Path(args.frames)
    vocab = None
    jobs = []  # (video_id, frames)
    if source.is_dir() or _looks_like_bundle(source):
        bundle = mio.load_bundle(source)
        vocab = bundle.vocabulary
        for vid in sorted(bundle.videos):
            jobs.append((vid, bundle.videos[vid].panoptic_frames(source=f"{vid}.masks")))
    else:
        doc = mio.load_json(source)
        video_id, frames = mio.frames_from_doc(doc, source=str(source))
        jobs.append((video_id or source.stem, frames))

    cfg = TrackerConfig(
        iou_gate=args.iou_gate,
        max_age=args.max_age,
        stuff_by_class=not args.no_stuff_merge,
    )
    graphs = []
    for vid, frames in jobs:
        if vocab is None:
            vocab = _tracker_vocabulary(frames, None)
        tubes = build_tubes(frames, cfg, vocab)
        num_frames = max((f.frame_index for f in frames), default=0) + 1
        geometry = (frames[0].height, frames[0].width) if frames else (1, 1)
        meta = VideoMeta(
            video_id=vid,
            num_frames=max(num_frames, 1),
            height=geometry[0],
            width=geometry[1],
        )
        graphs.append(SceneGraph(meta=meta, tubes=tuple(tubes), relations=()))
    bundle = mio.bundle_from_graphs(vocab or Vocabulary.generic(), graphs)
    mio.save_bundle(bundle, args.out)
    return 0


def _looks_like_bundle(path: Path) -> bool:
    if path.is_dir():
        return True
    if path.suffix != ".json":
        return False
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return False
    return isinstance(doc, dict) and "videos" in doc


def cmd_synth(args) -> int:
    doc = mio.load_json(args.script)
    script, vocab = mio.script_from_doc(doc)
    if vocab is None:
        vocab = Vocabulary.generic()
    max_class = max((obj.class_id for obj in script.objects), default=-1)
    max_pred = max((rel.predicate_id for rel in script.relations), default=-1)
    if max_class >= vocab.num_objects or max_pred >= vocab.num_predicates:
        raise mio.SchemaError(
            "/objects", "script class or predicate ids exceed the vocabulary"
        )
    if args.noise:
        noise = mio.noise_from_doc(mio.load_json(args.noise))
    else:
        noise = NoiseConfig(seed=args.seed)

    gt_graph, _frames = generate(script, seed=args.seed)
    pred_graph, ledger = perturb(gt_graph, noise)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mio.save_bundle(mio.bundle_from_graphs(vocab, [gt_graph]), out_dir / "gt.json")
    mio.save_bundle(mio.bundle_from_graphs(vocab, [pred_graph]), out_dir / "pred.json")
    ledger_doc = {"video_id": script.video_id, **ledger.to_dict()}
    mio.dump_json(ledger_doc, out_dir / "ledger.json")
    return 0


def cmd_baseline(args) -> int:
    train_bundle = mio.load_bundle(args.train_gt)
    test_bundle = mio.load_bundle(args.test_tubes)
    if train_bundle.vocabulary != test_bundle.vocabulary:
        raise mio.BundleError("vocabulary mismatch between training and test bundles")
    vocab = train_bundle.vocabulary

    if args.prior:
        prior = PredicatePrior.from_dict(mio.load_json(args.prior))
    else:
        prior = fit_prior(
            [record.graph for _, record in sorted(train_bundle.videos.items())],
            vocab,
            laplace_alpha=args.alpha,
        )
        if not prior.counts:
            print(
                "warning: empty training set; proceeding with a uniform prior",
                file=sys.stderr,
            )
    if args.save_prior:
        mio.dump_json(prior.to_dict(), args.save_prior)

    graphs = []
    for vid in sorted(test_bundle.videos):
        graph = test_bundle.videos[vid].graph
        relations = predict_relations(
            graph.tubes,
            graph.meta.num_frames,
            prior,
            budget=args.budget,
            theta=args.theta,
        )
        graphs.append(SceneGraph(meta=graph.meta, tubes=graph.tubes, relations=tuple(relations)))
    mio.save_bundle(mio.bundle_from_graphs(vocab, graphs), args.out)
    return 0


def cmd_labels(args) -> int:
    gt_bundle = mio.load_bundle(args.gt)
    pred_bundle = mio.load_bundle(args.pred)
    if gt_bundle.vocabulary != pred_bundle.vocabulary:
        raise mio.BundleError(
            "vocabulary mismatch between ground-truth and prediction bundles"
        )
    from .assign import form_relation_labels

    videos = []
    for vid in sorted(gt_bundle.videos):
        if vid not in pred_bundle.videos:
            print(f"warning: no predicted tubes for video {vid!r}", file=sys.stderr)
            continue
        labels = form_relation_labels(
            pred_bundle.videos[vid].graph.tubes,
            gt_bundle.videos[vid].graph,
            mask_gate=args.gate,
        )
        videos.append(mio.labels_to_doc(vid, labels))
    doc = {"mask_gate": args.gate, "videos": videos}
    if args.out:
        mio.dump_json(doc, args.out)
    else:
        sys.stdout.write(mio.canonical_dumps(doc))
    return 0


def cmd_rle(args) -> int:
    if args.input == "-":
        doc = json.loads(sys.stdin.read())
    else:
        doc = mio.load_json(args.input)
    if "grid" in doc:
        grid = np.asarray(doc["grid"], dtype=bool)
        mask = encode(grid)
    elif "rle" in doc:
        mask = BinaryMask(int(doc["h"]), int(doc["w"]), tuple(doc["rle"]))
    else:
        raise mio.BundleError("rle input needs either 'grid' or 'h'/'w'/'rle'")
    out = {
        "h": mask.height,
        "w": mask.width,
        "rle": list(mask.runs),
        "area": mask.area,
        "grid": decode(mask).astype(int).tolist(),
    }
    sys.stdout.write(mio.canonical_dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="masktubes",
        description="Mask-tube scene graph toolkit: validation, tracking,"
        " triplet recall evaluation, a relation baseline, and synthetic oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check bundle invariants")
    p.add_argument("paths", nargs="+", help="bundle directories or .json bundles")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", help="compute R@K / mR@K for predictions against GT")
    p.add_argument("gt", help="ground-truth bundle")
    p.add_argument("pred", help="prediction bundle")
    p.add_argument("--k", type=_int_list, default=(20, 50, 100))
    p.add_argument("--thresholds", type=_float_list, default=(0.5, 0.1))
    p.add_argument("--gate", type=float, default=0.5, help="mask IOU gate")
    p.add_argument("--corpus-wide-k", action="store_true", help="apply K corpus-wide")
    p.add_argument("--out", help="write the report JSON here")
    p.add_argument("--workers", type=_positive_int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("track", help="associate per-frame segments into tubes")
    p.add_argument("frames", help="mask document or bundle with panoptic frames")
    p.add_argument("--iou-gate", type=float, default=0.3)
    p.add_argument("--max-age", type=int, default=10)
    p.add_argument("--no-stuff-merge", action="store_true")
    p.add_argument("--out", required=True, help="output bundle (.json file or directory)")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("synth", help="generate a synthetic GT/pred pair plus oracle ledger")
    p.add_argument("script", help="scene script JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", help="noise configuration JSON")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("baseline", help="non-learned relation predictor")
    p.add_argument("train_gt", help="training ground-truth bundle")
    p.add_argument("test_tubes", help="bundle with tubes to predict relations for")
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--budget", type=_positive_int, default=100)
    p.add_argument("--alpha", type=float, default=1.0, help="Laplace smoothing")
    p.add_argument("--prior", help="load a previously saved prior instead of fitting")
    p.add_argument("--save-prior", help="write the fitted prior JSON here")
    p.add_argument("--out", required=True, help="output prediction bundle")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser(
        "labels", help="map GT relations onto predicted tubes as per-frame labels"
    )
    p.add_argument("gt", help="ground-truth bundle")
    p.add_argument("pred", help="bundle with predicted tubes")
    p.add_argument("--gate", type=float, default=0.5, help="mask IOU gate")
    p.add_argument("--out", help="write the label document here (stdout otherwise)")
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("rle", help="encode/decode a mask (roundtrip utility)")
    p.add_argument("input", help="JSON with 'grid' or 'h'/'w'/'rle' ('-' for stdin)")
    p.set_defaults(func=cmd_rle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (mio.BundleError, MaskError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PARSE_ERROR


if __name__ == "__main__":
    sys.exit(main())
