"""Prior fitting, pair selection, the temporal filter, and span extraction."""
import numpy as np
import pytest

from masktubes.baseline import (
    PredicatePrior,
    SmoothingKernel,
    extract_triplets,
    fit_prior,
    pair_proximity,
    predict_relations,
    score_frames,
    select_pairs,
    smooth,
)
from masktubes.core import RelationTriplet, SceneGraph, TimeSpan, VideoMeta, Vocabulary

from conftest import box_grid, small_vocab, tube_from_grids


def toy_graph(frame_counts):
    """One graph, subject class 0 / object class 1, one relation per predicate."""
    h = w = 10
    tubes = (
        tube_from_grids(1, 0, {t: box_grid(h, w, 0, 0, 4, 4) for t in range(40)}),
        tube_from_grids(2, 1, {t: box_grid(h, w, 5, 5, 9, 9) for t in range(40)}),
    )
    relations = tuple(
        RelationTriplet(1, 2, p, TimeSpan.from_intervals([(0, n)]))
        for p, n in enumerate(frame_counts)
        if n
    )
    return SceneGraph(VideoMeta("train", 40, h, w), tubes, relations)


class TestPrior:
    def test_counts_one_per_span_frame(self):
        vocab = small_vocab(num_predicates=3)
        prior = fit_prior([toy_graph([10])], vocab)
        assert prior.counts == {(0, 1, 0): 10}

    def test_empty_training_set_is_uniform(self):
        vocab = small_vocab(num_predicates=4)
        prior = fit_prior([], vocab)
        np.testing.assert_allclose(prior.row(0, 1), np.full(4, 0.25))

    def test_laplace_hand_example(self):
        # 30/10 frame counts, alpha=1, two predicates -> (31/42, 11/42)
        vocab = Vocabulary.generic(num_objects=4, num_predicates=2)
        prior = fit_prior([toy_graph([30, 10])], vocab)
        row = prior.row(0, 1)
        assert row[0] == pytest.approx(31 / 42, abs=0)
        assert row[1] == pytest.approx(11 / 42, abs=0)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(89)
        prior = PredicatePrior(num_predicates=7, laplace_alpha=0.5)
        for _ in range(50):
            prior.add(int(rng.integers(0, 3)), int(rng.integers(0, 3)), int(rng.integers(0, 7)), int(rng.integers(1, 40)))
        for cs in range(3):
            for co in range(3):
                assert prior.row(cs, co).sum() == pytest.approx(1.0, abs=1e-12)

    def test_roundtrip_serialization(self):
        prior = fit_prior([toy_graph([3, 0, 5])], small_vocab(num_predicates=4))
        clone = PredicatePrior.from_dict(prior.to_dict())
        assert clone == prior


class TestSelectPairs:
    def make_tubes(self, windows):
        h = w = 12
        tubes = []
        for i, (start, end) in enumerate(windows):
            r0 = (i % 3) * 4
            grids = {t: box_grid(h, w, r0, 0, r0 + 3, 3) for t in range(start, end)}
            tubes.append(tube_from_grids(i, i, grids))
        return tubes

    def test_two_covisible_tubes_both_pairs(self):
        tubes = self.make_tubes([(0, 10), (0, 10)])
        assert sorted(select_pairs(tubes, 10)) == [(0, 1), (1, 0)]

    def test_never_cooccurring_excluded(self):
        tubes = self.make_tubes([(0, 5), (5, 10)])
        assert select_pairs(tubes, 10) == []

    def test_budget_cuts_ranking(self):
        tubes = self.make_tubes([(0, 10), (0, 8), (2, 10)])
        assert len(select_pairs(tubes, 3)) == 3

    def test_matches_exhaustive_ranking_oracle(self):
        rng = np.random.default_rng(97)
        for _ in range(20):
            windows = []
            for _ in range(5):
                start = int(rng.integers(0, 10))
                windows.append((start, int(rng.integers(start + 1, 16))))
            tubes = self.make_tubes(windows)
            got = select_pairs(tubes, 6)

            scored = []
            for a in tubes:
                for b in tubes:
                    if a.entity_id == b.entity_id:
                        continue
                    common = sorted(a.visible_frames() & b.visible_frames())
                    if not common:
                        continue
                    prox = pair_proximity(a, b, common)
                    scored.append((-len(common), -prox, a.entity_id, b.entity_id))
            scored.sort()
            assert got == [(s, o) for _, _, s, o in scored[:6]]

    def test_budget_must_be_positive(self):
        with pytest.raises(ValueError):
            select_pairs([], 0)


class TestScoreFrames:
    def test_constant_on_covisible(self):
        vocab = small_vocab(num_predicates=3)
        graph = toy_graph([6])
        prior = fit_prior([graph], vocab)
        subject, obj = graph.tubes
        scores = score_frames(subject, obj, prior, 40)
        row = prior.row(0, 1)
        np.testing.assert_allclose(scores[0], row)
        np.testing.assert_allclose(scores[39], row)

    def test_zero_without_covisibility(self):
        vocab = small_vocab(num_predicates=3)
        prior = fit_prior([], vocab)
        h = w = 8
        a = tube_from_grids(1, 0, {t: box_grid(h, w, 0, 0, 3, 3) for t in range(0, 4)})
        b = tube_from_grids(2, 1, {t: box_grid(h, w, 4, 4, 7, 7) for t in range(6, 9)})
        scores = score_frames(a, b, prior, 10)
        assert not scores.any()

    def test_staggered_support(self):
        vocab = small_vocab(num_predicates=3)
        prior = fit_prior([], vocab)
        h = w = 8
        a = tube_from_grids(1, 0, {t: box_grid(h, w, 0, 0, 3, 3) for t in range(0, 6)})
        b = tube_from_grids(2, 1, {t: box_grid(h, w, 4, 4, 7, 7) for t in range(4, 9)})
        scores = score_frames(a, b, prior, 10)
        assert set(np.flatnonzero(scores.any(axis=1)).tolist()) == {4, 5}


class TestSmooth:
    def test_constant_series_fixed_point(self):
        for length in (1, 2, 3, 5, 9):
            series = np.full(length, 0.7)
            np.testing.assert_allclose(smooth(series), series, atol=1e-15)

    def test_impulse_frozen_values(self):
        got = smooth(np.array([0.0, 0.0, 1.0, 0.0, 0.0]))
        expected = np.array([0.25 / 1.75, 0.5 / 2.25, 1.0 / 2.5, 0.5 / 2.25, 0.25 / 1.75])
        np.testing.assert_allclose(got, expected, atol=1e-15)

    def test_matches_direct_convolution_oracle(self):
        rng = np.random.default_rng(101)
        weights = (0.25, 0.5, 1.0, 0.5, 0.25)
        for _ in range(50):
            length = int(rng.integers(1, 20))
            series = rng.random(length)
            got = smooth(series, SmoothingKernel(weights))
            center = len(weights) // 2
            expected = np.zeros(length)
            for t in range(length):
                num = den = 0.0
                for k, w in enumerate(weights):
                    idx = t + k - center
                    if 0 <= idx < length:
                        num += w * series[idx]
                        den += w
                expected[t] = num / den
            np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_length_one_identity(self):
        np.testing.assert_allclose(smooth(np.array([0.42])), [0.42])

    def test_linearity(self):
        rng = np.random.default_rng(103)
        x = rng.random(12)
        y = rng.random(12)
        lhs = smooth(2.0 * x + 3.0 * y)
        rhs = 2.0 * smooth(x) + 3.0 * smooth(y)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_zero_padding_mode(self):
        series = np.full(5, 1.0)
        got = smooth(series, boundary="zero")
        np.testing.assert_allclose(got, [1.75 / 2.5, 2.25 / 2.5, 1.0, 2.25 / 2.5, 1.75 / 2.5])

    def test_kernel_validation(self):
        with pytest.raises(ValueError):
            SmoothingKernel((0.5, 1.0))  # even length
        with pytest.raises(ValueError):
            SmoothingKernel((0.5, 1.0, 0.25))  # not symmetric
        with pytest.raises(ValueError):
            SmoothingKernel((1.0, 0.0, 1.0))  # zero center
        with pytest.raises(ValueError):
            SmoothingKernel((-0.1, 1.0, -0.1))

    def test_two_dim_series(self):
        series = np.stack([np.full(7, 0.3), np.zeros(7)], axis=1)
        out = smooth(series)
        np.testing.assert_allclose(out[:, 0], 0.3)
        np.testing.assert_allclose(out[:, 1], 0.0)


class TestExtract:
    def test_all_zero_empty(self):
        assert extract_triplets(np.zeros((6, 3)), 0.3, 1, 2) == []

    def test_single_window(self):
        scores = np.zeros((10, 2))
        scores[3:7, 1] = 0.8
        out = extract_triplets(scores, 0.3, 1, 2)
        assert len(out) == 1
        assert out[0].predicate_id == 1
        assert out[0].span.intervals == ((3, 7),)
        assert out[0].score == pytest.approx(0.8)

    def test_bimodal_scattered_span(self):
        scores = np.zeros((12, 1))
        scores[1:4, 0] = 0.9
        scores[4:8, 0] = 0.1  # dips below theta
        scores[8:11, 0] = 0.7
        out = extract_triplets(scores, 0.3, 5, 6)
        assert len(out) == 1
        assert out[0].span.intervals == ((1, 4), (8, 11))
        assert out[0].score == pytest.approx((0.9 * 3 + 0.7 * 3) / 6)

    def test_theta_validated(self):
        with pytest.raises(ValueError):
            extract_triplets(np.zeros((3, 1)), 0.0, 1, 2)
        with pytest.raises(ValueError):
            extract_triplets(np.zeros((3, 1)), 1.0, 1, 2)


class TestEndToEnd:
    def test_spans_stay_inside_covisibility(self):
        vocab = small_vocab(num_predicates=3)
        graph = toy_graph([25])
        prior = fit_prior([graph], vocab)
        h = w = 10
        a = tube_from_grids(1, 0, {t: box_grid(h, w, 0, 0, 4, 4) for t in range(5, 20)})
        b = tube_from_grids(2, 1, {t: box_grid(h, w, 5, 5, 9, 9) for t in range(10, 30)})
        relations = predict_relations([a, b], 40, prior, theta=0.3)
        covis = a.visible_frames() & b.visible_frames()
        for rel in relations:
            assert set(rel.span.frames()) <= covis

    def test_deterministic(self):
        vocab = small_vocab(num_predicates=3)
        graph = toy_graph([25, 5])
        prior = fit_prior([graph], vocab)
        first = predict_relations(graph.tubes, 40, prior)
        second = predict_relations(graph.tubes, 40, prior)
        assert first == second

    def test_recovers_scripted_relation(self):
        vocab = small_vocab(num_predicates=3)
        graph = toy_graph([30])
        prior = fit_prior([graph], vocab)
        relations = predict_relations(graph.tubes, 40, prior, theta=0.3)
        keys = {rel.key for rel in relations}
        assert (1, 2, 0) in keys
        by_key = {rel.key: rel for rel in relations}
        assert by_key[(1, 2, 0)].span.intervals == ((0, 40),)
