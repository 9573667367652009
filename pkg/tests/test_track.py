"""Hungarian assignment and IOU tracker against brute-force oracles."""
import itertools

import numpy as np
import pytest

from masktubes.core import Vocabulary
from masktubes.rle import MaskError, PanopticFrame, Segment, encode
from masktubes.synth import generate, lane_script
from masktubes.track import TrackerConfig, associate_step, build_tubes, hungarian

from conftest import box_grid


def brute_force_cost(matrix) -> float:
    """Minimum assignment cost by enumerating injections of the smaller side."""
    rows = len(matrix)
    cols = len(matrix[0])
    if rows <= cols:
        return min(
            sum(matrix[r][c] for r, c in enumerate(perm))
            for perm in itertools.permutations(range(cols), rows)
        )
    return min(
        sum(matrix[r][c] for c, r in enumerate(perm))
        for perm in itertools.permutations(range(rows), cols)
    )


class TestHungarian:
    def test_zero_diagonal(self):
        cost = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
        assert hungarian(cost) == [(0, 0), (1, 1), (2, 2)]

    def test_single_cell(self):
        assert hungarian([[5.0]]) == [(0, 0)]

    def test_empty(self):
        assert hungarian([]) == []

    def test_tie_preference_low_indices(self):
        assert hungarian([[0, 0], [0, 0]]) == [(0, 0), (1, 1)]
        assert hungarian(np.zeros((3, 3)).tolist()) == [(0, 0), (1, 1), (2, 2)]

    def test_rectangular_shapes(self):
        pairs = hungarian([[4, 1, 3], [2, 0, 5]])
        assert len(pairs) == 2
        assert sum(1 for _ in set(c for _, c in pairs)) == 2

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            hungarian([[float("nan")]])
        with pytest.raises(ValueError):
            hungarian([[float("inf")]])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(37)
        for _ in range(300):
            rows = int(rng.integers(1, 8))
            cols = int(rng.integers(1, 8))
            matrix = rng.uniform(-10, 10, size=(rows, cols)).tolist()
            pairs = hungarian(matrix)
            assert len(pairs) == min(rows, cols)
            assert len(set(r for r, _ in pairs)) == len(pairs)
            assert len(set(c for _, c in pairs)) == len(pairs)
            got = sum(matrix[r][c] for r, c in pairs)
            assert got == pytest.approx(brute_force_cost(matrix), abs=1e-9)

    def test_beats_greedy(self):
        rng = np.random.default_rng(41)
        for _ in range(200):
            n = int(rng.integers(2, 7))
            matrix = rng.uniform(0, 1, size=(n, n))
            pairs = hungarian(matrix.tolist())
            optimal = sum(matrix[r][c] for r, c in pairs)
            taken_cols = set()
            greedy = 0.0
            for r in range(n):
                c = min(
                    (c for c in range(n) if c not in taken_cols),
                    key=lambda c: matrix[r][c],
                )
                taken_cols.add(c)
                greedy += matrix[r][c]
            assert optimal <= greedy + 1e-12

    def test_deterministic(self):
        rng = np.random.default_rng(43)
        matrix = rng.uniform(0, 1, size=(6, 6)).tolist()
        assert hungarian(matrix) == hungarian(matrix)


def frame_of(t, h, w, boxes):
    """boxes: list of (entity_id, class_id, r0, c0, r1, c1)."""
    segments = tuple(
        Segment(eid, cid, 1.0, encode(box_grid(h, w, r0, c0, r1, c1)))
        for eid, cid, r0, c0, r1, c1 in boxes
    )
    return PanopticFrame(t, h, w, segments)


class TestTracker:
    def test_static_segment_three_frames(self):
        frames = [frame_of(t, 8, 8, [(0, 2, 1, 1, 4, 4)]) for t in range(3)]
        tubes = build_tubes(frames)
        assert len(tubes) == 1
        assert sorted(tubes[0].frames) == [0, 1, 2]
        assert tubes[0].class_id == 2
        assert tubes[0].score == 1.0

    def test_total_cost_preserves_identity_over_best_single_match(self):
        # straight IOUs are 0.25 each; object A's best single match is the
        # cross pairing at 1/3, but the straight total wins the assignment
        h, w = 4, 120
        f0 = frame_of(0, h, w, [(0, 1, 0, 0, 4, 40), (1, 1, 0, 44, 4, 84)])
        f1 = frame_of(1, h, w, [(0, 1, 0, 24, 4, 64), (1, 1, 0, 68, 4, 108)])
        tubes = build_tubes([f0, f1], TrackerConfig(iou_gate=0.2))
        assert len(tubes) == 2
        assert sorted(tubes[0].frames) == [0, 1]
        assert sorted(tubes[1].frames) == [0, 1]
        # identity check: track 0 keeps the left-then-middle path
        assert tubes[0].frames[1].bbox() == (0, 24, 4, 64)
        assert tubes[1].frames[1].bbox() == (0, 68, 4, 108)

    def test_track_survives_max_age_gap(self):
        box = (0, 1, 1, 1, 5, 5)
        frames = [frame_of(0, 8, 8, [box]), frame_of(3, 8, 8, [box])]
        tubes = build_tubes(frames, TrackerConfig(max_age=2))
        assert len(tubes) == 1

    def test_track_retired_after_max_age_gap(self):
        box = (0, 1, 1, 1, 5, 5)
        frames = [frame_of(0, 8, 8, [box]), frame_of(4, 8, 8, [box])]
        tubes = build_tubes(frames, TrackerConfig(max_age=2))
        assert len(tubes) == 2  # gap of max_age+1 frames: new identity

    def test_class_gate_forbids_cross_class_match(self):
        f0 = frame_of(0, 8, 8, [(0, 1, 1, 1, 5, 5)])
        f1 = frame_of(1, 8, 8, [(0, 2, 1, 1, 5, 5)])
        tubes = build_tubes([f0, f1])
        assert len(tubes) == 2

    def test_stuff_merges_per_class(self):
        vocab = Vocabulary.generic(num_objects=4, num_predicates=2, stuff=[3])
        f0 = frame_of(0, 8, 8, [(0, 3, 0, 0, 2, 2), (1, 3, 4, 4, 8, 8)])
        f1 = frame_of(1, 8, 8, [(2, 3, 0, 0, 2, 2)])
        tubes = build_tubes([f0, f1], TrackerConfig(), vocab)
        assert len(tubes) == 1
        tube = tubes[0]
        assert tube.frames[0].area == 4 + 16  # frame-0 masks unioned
        assert tube.frames[1].area == 4

    def test_stuff_flag_off_tracks_individually(self):
        vocab = Vocabulary.generic(num_objects=4, num_predicates=2, stuff=[3])
        f0 = frame_of(0, 8, 8, [(0, 3, 0, 0, 2, 2), (1, 3, 4, 4, 8, 8)])
        tubes = build_tubes([f0], TrackerConfig(stuff_by_class=False), vocab)
        assert len(tubes) == 2

    def test_empty_input(self):
        assert build_tubes([]) == []

    def test_geometry_drift_rejected(self):
        f0 = frame_of(0, 8, 8, [(0, 1, 1, 1, 5, 5)])
        f1 = frame_of(1, 9, 8, [(0, 1, 1, 1, 5, 5)])
        with pytest.raises(MaskError):
            build_tubes([f0, f1])

    def test_unordered_frames_rejected(self):
        f0 = frame_of(0, 8, 8, [(0, 1, 1, 1, 5, 5)])
        f1 = frame_of(1, 8, 8, [(0, 1, 1, 1, 5, 5)])
        with pytest.raises(ValueError):
            build_tubes([f1, f0])

    def test_one_to_one_per_step(self):
        f0 = frame_of(0, 8, 16, [(0, 1, 0, 0, 4, 4), (1, 1, 0, 8, 4, 12)])
        f1 = frame_of(1, 8, 16, [(0, 1, 0, 1, 4, 5), (1, 1, 0, 9, 4, 13)])
        tracks = associate_step([], f0, TrackerConfig())
        tracks = associate_step(tracks, f1, TrackerConfig())
        assert len(tracks) == 2
        assert all(len(trk.frames) == 2 for trk in tracks)

    def test_determinism_on_synthetic_scene(self):
        script = lane_script(seed=5)
        _, frames = generate(script)
        first = build_tubes(frames)
        second = build_tubes(frames)
        assert [t.entity_id for t in first] == [t.entity_id for t in second]
        assert first == second

    def test_output_tubes_inherit_disjointness(self):
        import warnings as _warnings

        from masktubes.core import SceneGraph, VideoMeta, Vocabulary, validate_scene_graph
        from masktubes.synth import random_script

        for seed in (2, 8, 21):
            script = random_script(seed)
            with _warnings.catch_warnings():
                _warnings.simplefilter("ignore", RuntimeWarning)
                _, frames = generate(script)
            tubes = build_tubes(frames)
            graph = SceneGraph(
                VideoMeta("t", script.num_frames, script.height, script.width),
                tuple(tubes),
            )
            violations = validate_scene_graph(
                graph, Vocabulary.generic(num_objects=64, num_predicates=4)
            )
            assert [v for v in violations if v.kind == "mask_overlap"] == []

    def test_zero_noise_scene_recovers_gt_exactly(self):
        for seed in (0, 1):
            script = lane_script(seed=seed)
            gt_graph, frames = generate(script)
            tubes = build_tubes(frames)
            assert len(tubes) == len(gt_graph.tubes)
            # optimal relabeling: same-class tubes must carry identical masks
            gt_by_class = {t.class_id: t for t in gt_graph.tubes}
            for tube in tubes:
                gt_tube = gt_by_class[tube.class_id]
                assert tube.frames == gt_tube.frames
