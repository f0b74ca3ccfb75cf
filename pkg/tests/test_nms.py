"""Weighted merging and locality-aware NMS behavior and counters."""

import numpy as np
import pytest

from textdet.errors import NonPositiveScore
from textdet.geometry import Detection
from textdet.nms import (
    MergeConfig,
    MergeStats,
    locality_aware_nms,
    should_merge,
    standard_nms,
    weighted_merge,
)

BASE = np.array([[0.0, 0.0], [20.0, 0.0], [20.0, 8.0], [0.0, 8.0]])


def jittered(rng, n, base=BASE, amp=0.1, score=1.0):
    return [
        Detection(quad=base + rng.uniform(-amp, amp, size=(4, 2)), score=score)
        for _ in range(n)
    ]


class TestWeightedMerge:
    def test_scores_sum(self):
        a = Detection(quad=BASE, score=2.0)
        b = Detection(quad=BASE + 1.0, score=1.0)
        m = weighted_merge(a, b)
        assert m.score == pytest.approx(3.0)

    def test_coordinates_are_score_weighted_mean(self):
        a = Detection(quad=BASE, score=3.0)
        b = Detection(quad=BASE + 4.0, score=1.0)
        m = weighted_merge(a, b)
        assert np.allclose(m.quad, BASE + 1.0)

    def test_symmetric(self):
        a = Detection(quad=BASE, score=1.5)
        b = Detection(quad=BASE + 2.0, score=0.5)
        assert np.allclose(weighted_merge(a, b).quad, weighted_merge(b, a).quad)

    def test_rejects_nonpositive_score(self):
        with pytest.raises(NonPositiveScore):
            weighted_merge(Detection(BASE, 0.0), Detection(BASE, 1.0))


class TestShouldMerge:
    def test_identical_merge(self):
        d = Detection(BASE, 1.0)
        assert should_merge(d, d)

    def test_low_iou_pair_threshold_dependence(self):
        # unit squares offset by (0.5, 0.5): IoU = 1/7
        sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        a, b = Detection(sq, 1.0), Detection(sq + 0.5, 1.0)
        assert not should_merge(a, b, MergeConfig(merge_iou_threshold=0.3))
        assert should_merge(a, b, MergeConfig(merge_iou_threshold=0.1))


class TestStandardNms:
    def test_keeps_highest_score(self, rng):
        dets = jittered(rng, 5) + [Detection(BASE, 7.0)]
        kept = standard_nms(dets, 0.2)
        assert len(kept) == 1
        assert kept[0].score == 7.0

    def test_disjoint_all_kept(self):
        dets = [Detection(BASE + 100.0 * i, 1.0) for i in range(4)]
        assert len(standard_nms(dets, 0.2)) == 4

    def test_counts_pairwise_evaluations(self, rng):
        dets = [Detection(BASE + 100.0 * i, 1.0) for i in range(10)]
        stats = MergeStats()
        standard_nms(dets, 0.2, stats)
        assert stats.pairwise_iou_evaluations == 45  # all pairs survive


class TestLocalityAwareNms:
    def test_duplicates_collapse_to_one(self, rng):
        n = 200
        dets = [Detection(BASE.copy(), 1.0) for _ in range(n)]
        kept, stats = locality_aware_nms(dets)
        assert len(kept) == 1
        assert kept[0].score == pytest.approx(float(n))
        assert np.allclose(kept[0].quad, BASE, atol=1e-9)
        assert stats.weighted_merge_calls == n - 1

    def test_two_clusters_merge_counts(self):
        # row-contiguous clusters: each of size k contributes k-1 merges
        far = BASE + 500.0
        dets = [Detection(BASE.copy(), 1.0) for _ in range(500)]
        dets += [Detection(far.copy(), 1.0) for _ in range(500)]
        kept, stats = locality_aware_nms(dets)
        assert len(kept) == 2
        assert stats.weighted_merge_calls == 998

    def test_single_pass_linear_iou_count(self):
        dets = [Detection(BASE.copy(), 1.0) for _ in range(100)]
        _, stats = locality_aware_nms(dets)
        # one evaluation per adjacent pair, none in the final NMS (1 survivor)
        assert stats.pairwise_iou_evaluations == 99

    def test_empty_input(self):
        kept, stats = locality_aware_nms([])
        assert kept == []
        assert stats.weighted_merge_calls == 0

    def test_merged_cluster_centroid(self, rng):
        dets = jittered(rng, 50, amp=0.3)
        kept, _ = locality_aware_nms(dets)
        assert len(kept) == 1
        mean = np.mean([d.quad for d in dets], axis=0)
        # equal scores make the running weighted mean an exact average
        assert np.allclose(kept[0].quad, mean, atol=1e-9)

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            MergeConfig(merge_iou_threshold=1.5)
