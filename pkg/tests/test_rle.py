"""Codec correctness against dense-grid oracles."""
import numpy as np
import pytest

from masktubes.rle import (
    BinaryMask,
    MaskError,
    PanopticFrame,
    Segment,
    decode,
    encode,
    from_intervals,
    intersection_area,
    mask_iou,
    mask_union,
)

from conftest import box_grid, random_grid


def assert_canonical(mask: BinaryMask):
    assert sum(mask.runs) == mask.height * mask.width
    assert all(r > 0 for r in mask.runs[1:])
    assert all(r >= 0 for r in mask.runs)


def test_encode_hand_example():
    mask = encode(np.array([[1, 0], [0, 1]]))
    assert mask.runs == (0, 1, 2, 1)
    assert mask.area == 2


def test_encode_all_zero():
    assert encode(np.zeros((3, 3), dtype=bool)).runs == (9,)


def test_decode_hand_examples():
    assert decode(BinaryMask(2, 2, (0, 4))).all()
    assert not decode(BinaryMask(2, 2, (4,))).any()
    np.testing.assert_array_equal(
        decode(BinaryMask(2, 2, (0, 1, 2, 1))), np.array([[1, 0], [0, 1]], dtype=bool)
    )


def test_roundtrip_fuzz():
    rng = np.random.default_rng(7)
    for _ in range(2000):
        h = int(rng.integers(1, 65))
        w = int(rng.integers(1, 65))
        grid = random_grid(rng, h, w)
        mask = encode(grid)
        assert_canonical(mask)
        np.testing.assert_array_equal(decode(mask), grid)


def test_iou_trivial_cases():
    a = encode(box_grid(8, 8, 0, 0, 4, 4))
    b = encode(box_grid(8, 8, 4, 4, 8, 8))
    empty = encode(np.zeros((8, 8), dtype=bool))
    assert mask_iou(a, a) == 1.0
    assert mask_iou(a, b) == 0.0
    assert mask_iou(empty, empty) == 0.0
    assert mask_iou(a, empty) == 0.0


def test_iou_matches_dense_oracle():
    rng = np.random.default_rng(11)
    for _ in range(500):
        h = int(rng.integers(1, 40))
        w = int(rng.integers(1, 40))
        ga, gb = random_grid(rng, h, w), random_grid(rng, h, w)
        inter = int(np.logical_and(ga, gb).sum())
        union = int(np.logical_or(ga, gb).sum())
        expected = inter / union if union else 0.0
        got = mask_iou(encode(ga), encode(gb))
        assert abs(got - expected) <= 1e-12
        assert 0.0 <= got <= 1.0
        assert got == mask_iou(encode(gb), encode(ga))


def test_intersection_area_matches_popcount():
    rng = np.random.default_rng(13)
    for _ in range(300):
        h, w = int(rng.integers(1, 33)), int(rng.integers(1, 33))
        ga, gb = random_grid(rng, h, w), random_grid(rng, h, w)
        assert intersection_area(encode(ga), encode(gb)) == int(
            np.logical_and(ga, gb).sum()
        )


def test_union_matches_dense_or():
    rng = np.random.default_rng(17)
    for _ in range(200):
        h, w = int(rng.integers(1, 25)), int(rng.integers(1, 25))
        ga, gb = random_grid(rng, h, w), random_grid(rng, h, w)
        merged = mask_union(encode(ga), encode(gb))
        assert_canonical(merged)
        np.testing.assert_array_equal(decode(merged), np.logical_or(ga, gb))


def test_bbox_matches_dense_oracle():
    rng = np.random.default_rng(19)
    for _ in range(200):
        h, w = int(rng.integers(1, 25)), int(rng.integers(1, 25))
        grid = random_grid(rng, h, w)
        got = encode(grid).bbox()
        coords = np.argwhere(grid)
        if coords.size == 0:
            assert got is None
        else:
            expected = (
                int(coords[:, 0].min()),
                int(coords[:, 1].min()),
                int(coords[:, 0].max()) + 1,
                int(coords[:, 1].max()) + 1,
            )
            assert got == expected


def test_from_intervals_roundtrip():
    mask = encode(box_grid(6, 6, 1, 1, 4, 4))
    rebuilt = from_intervals(6, 6, mask.intervals())
    assert rebuilt == mask


def test_encode_rejects_bad_input():
    with pytest.raises(MaskError):
        encode(np.zeros((2, 2)), height=3)
    with pytest.raises(MaskError):
        encode(np.zeros((2, 2)), width=3)
    with pytest.raises(MaskError):
        encode(np.zeros(4))


def test_malformed_runs_rejected():
    with pytest.raises(MaskError):
        BinaryMask(2, 2, (1, 2))  # wrong total
    with pytest.raises(MaskError):
        BinaryMask(2, 2, (1, 0, 3))  # interior zero run
    with pytest.raises(MaskError):
        BinaryMask(2, 2, (-1, 5))
    with pytest.raises(MaskError):
        BinaryMask(2, 2, ())
    with pytest.raises(MaskError):
        BinaryMask(0, 2, (0,))


def test_iou_rejects_geometry_mismatch():
    with pytest.raises(MaskError):
        mask_iou(encode(np.zeros((2, 2))), encode(np.zeros((2, 3))))


def test_panoptic_frame_rejects_overlap():
    a = Segment(1, 0, 1.0, encode(box_grid(4, 4, 0, 0, 2, 2)))
    b = Segment(2, 1, 1.0, encode(box_grid(4, 4, 1, 1, 3, 3)))
    with pytest.raises(MaskError):
        PanopticFrame(0, 4, 4, (a, b))
    c = Segment(2, 1, 1.0, encode(box_grid(4, 4, 2, 2, 4, 4)))
    PanopticFrame(0, 4, 4, (a, c))  # disjoint: fine


def test_panoptic_frame_rejects_geometry_drift():
    a = Segment(1, 0, 1.0, encode(box_grid(4, 4, 0, 0, 2, 2)))
    with pytest.raises(MaskError):
        PanopticFrame(0, 5, 4, (a,))
